use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctdb_core::dataset::{validate_metadata_str, DatasetManifest, PARTIAL_MARKER};
use ctdb_core::semantic::{image_key, EmbeddingSet, EmbeddingVector};
use sha2::{Digest, Sha256};
use tempfile::TempDir;
use walkdir::WalkDir;

fn ctdb(args: &[&str]) -> Output {
    ctdb_env(args, &[])
}

fn ctdb_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctdb"));
    cmd.args(args).env_remove("CTDB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn ctdb")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

const SMALL: &str = r#"{"num_reference_slices": 2, "image_size": 64, "settings": ["S1_noise"]}"#;

fn generate(dir: &Path, config: &str, seed: u64, env: &[(&str, &str)]) -> PathBuf {
    let cfg = write_config(dir, config);
    let out = dir.join("ds");
    let o = ctdb_env(
        &[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            &seed.to_string(),
            "--out",
            out.to_str().unwrap(),
        ],
        env,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

/// SHA-256 of every file, keyed by path relative to `root`.
fn tree_hash(root: &Path) -> BTreeMap<String, String> {
    WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            let digest = Sha256::digest(fs::read(e.path()).unwrap());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (rel, hex)
        })
        .collect()
}

fn count_files(dir: &Path) -> usize {
    WalkDir::new(dir)
        .into_iter()
        .filter(|e| e.as_ref().unwrap().file_type().is_file())
        .count()
}

#[test]
fn generates_expected_layout() {
    let tmp = TempDir::new().unwrap();
    let ds = generate(tmp.path(), SMALL, 7, &[]);
    assert_eq!(count_files(&ds.join("degraded")), 8);
    assert_eq!(count_files(&ds.join("meta")), 8);
    assert_eq!(count_files(&ds.join("refs")), 2);
    assert!(ds.join("manifest.json").is_file());
    assert!(!ds.join(PARTIAL_MARKER).exists());

    let manifest = DatasetManifest::load(&ds.join("manifest.json")).unwrap();
    assert_eq!(manifest.samples.len(), 8);
    assert_eq!(manifest.references.len(), 2);
    assert_eq!(manifest.config.master_seed, 7);
    for s in &manifest.samples {
        assert!(ds.join(&s.degraded_path).is_file());
        assert!(ds.join(&s.reference_path).is_file());
        assert!(ds.join(&s.metadata_path).is_file());
    }
}

#[test]
fn metadata_files_validate() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"num_reference_slices": 1, "image_size": 64,
                  "settings": ["S5_metal", "M5_m+b+n"], "levels": [0, 3]}"#;
    let ds = generate(tmp.path(), cfg, 3, &[]);
    let mut seen = 0;
    for e in fs::read_dir(ds.join("meta")).unwrap() {
        let text = fs::read_to_string(e.unwrap().path()).unwrap();
        let meta = validate_metadata_str(&text).unwrap();
        let max = meta.components.iter().map(|c| c.level).max().unwrap();
        assert_eq!(meta.severity, max);
        assert_eq!(meta.metal_bbox.is_some(), meta.order.iter().any(|k| k.name() == "metal"));
        seen += 1;
    }
    assert_eq!(seen, 4);
}

#[test]
fn generation_is_reproducible_across_thread_counts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    let cfg = r#"{"num_reference_slices": 2, "image_size": 64, "settings": ["S2_blur", "M1_b+n"]}"#;
    let ha = tree_hash(&generate(a.path(), cfg, 11, &[("CTDB_THREADS", "1")]));
    let hb = tree_hash(&generate(b.path(), cfg, 11, &[("CTDB_THREADS", "3")]));
    assert_eq!(ha, hb);
    let hc = tree_hash(&generate(c.path(), cfg, 12, &[]));
    assert_ne!(ha, hc);
}

#[test]
fn configuration_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ds");
    let out = out.to_str().unwrap();

    let missing = ctdb(&["generate", "--config", "/nonexistent.json", "--seed", "1", "--out", out]);
    assert_eq!(code(&missing), 1);

    let bad = write_config(tmp.path(), r#"{"num_reference_slices": 2, "bogus": true}"#);
    let o = ctdb(&["generate", "--config", bad.to_str().unwrap(), "--seed", "1", "--out", out]);
    assert_eq!(code(&o), 1);

    let zero = write_config(tmp.path(), r#"{"num_reference_slices": 0}"#);
    let o = ctdb(&["generate", "--config", zero.to_str().unwrap(), "--seed", "1", "--out", out]);
    assert_eq!(code(&o), 1);
    assert!(!tmp.path().join("ds").join("manifest.json").exists());

    assert_eq!(code(&ctdb(&["generate", "--seed", "x"])), 1);
    assert_eq!(code(&ctdb(&["frobnicate"])), 1);
    assert_eq!(code(&ctdb(&["--help"])), 0);
    assert_eq!(code(&ctdb(&["--version"])), 0);

    let cfg = write_config(tmp.path(), SMALL);
    let o = ctdb_env(
        &["generate", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out],
        &[("CTDB_THREADS", "many")],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn report_with_and_without_embeddings() {
    let tmp = TempDir::new().unwrap();
    let ds = generate(tmp.path(), SMALL, 5, &[]);
    let manifest = ds.join("manifest.json");

    let o = ctdb(&["report", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let reports = ds.join("reports");
    for f in ["samples.csv", "correlation.csv", "levels.csv", "correlation.md"] {
        assert!(reports.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(reports.join("correlation.csv")).unwrap();
    assert!(csv.starts_with("setting,metric,spearman,pearson,n\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(!reports.join("drift.csv").exists());

    // synthetic embeddings: references at a fixed direction, degraded images
    // rotated away in proportion to their level
    let m = DatasetManifest::load(&manifest).unwrap();
    let mut set = EmbeddingSet::new(2).unwrap();
    for r in &m.references {
        set.push(EmbeddingVector::new(image_key(&r.reference_id), vec![1.0, 0.0]).unwrap())
            .unwrap();
    }
    for s in &m.samples {
        let angle = 0.2 * (s.severity.get() as f64 + 1.0) + 0.01 * s.slice as f64;
        set.push(EmbeddingVector::new(image_key(&s.sample_id), vec![angle.cos(), angle.sin()]).unwrap())
            .unwrap();
    }
    let emb = tmp.path().join("emb.ctde");
    set.save(&emb).unwrap();
    let custom = tmp.path().join("custom");
    let o = ctdb(&[
        "report",
        "--manifest",
        manifest.to_str().unwrap(),
        "--metrics",
        "ssim",
        "--embeddings",
        emb.to_str().unwrap(),
        "--out",
        custom.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let drift = fs::read_to_string(custom.join("drift.csv")).unwrap();
    let row = drift.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(&fields[..2], ["S1_noise", "drift"]);
    let rho: f64 = fields[2].parse().unwrap();
    assert!(rho > 0.9, "{row}");
    let csv = fs::read_to_string(custom.join("correlation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn report_rejects_unknown_metric() {
    let tmp = TempDir::new().unwrap();
    let ds = generate(tmp.path(), SMALL, 5, &[]);
    let manifest = ds.join("manifest.json");
    let o = ctdb(&["report", "--manifest", manifest.to_str().unwrap(), "--metrics", "psnr,lpips"]);
    assert_eq!(code(&o), 1);
    let o = ctdb(&["report", "--manifest", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn report_with_missing_files_exits_two() {
    let tmp = TempDir::new().unwrap();
    let ds = generate(tmp.path(), SMALL, 5, &[]);
    fs::remove_file(ds.join("degraded/S1_noise/L2/slice_0001.ctdi")).unwrap();
    let o = ctdb(&["report", "--manifest", ds.join("manifest.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let missing = fs::read_to_string(ds.join("reports/missing.txt")).unwrap();
    assert_eq!(missing.lines().count(), 1);
    assert!(missing.contains("slice_0001"));
    // remaining samples are still reported
    assert!(ds.join("reports/correlation.csv").is_file());
}

#[test]
fn phantom_subcommand_writes_image() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p.ctdi");
    let o = ctdb(&["phantom", "--size", "96", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let img = ctdb_core::tomo::io::load_image(&out).unwrap();
    let expected = ctdb_core::phantom::make_phantom(96, 4).unwrap();
    assert_eq!((img.height(), img.width()), (96, 96));
    // files hold f32 samples
    for (a, b) in img.values().iter().zip(expected.values()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    let o = ctdb(&["phantom", "--size", "8", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}
