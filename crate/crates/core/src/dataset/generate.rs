use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::GenerationConfig;
use super::metadata::{describe, SampleMetadata, Split, GENERATOR_VERSION, METADATA_SCHEMA};
use crate::degrade::{compose_mixture, degrade, MixtureConfig, Setting, SeverityLevel};
use crate::error::{Error, Result};
use crate::phantom::make_phantom;
use crate::seed::{derive_seed, phantom_seed, sample_seed};
use crate::spectral::spectral_descriptor;
use crate::tomo::io::save_image;
use crate::tomo::Image;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Present while generation runs and left behind, listing the failures,
/// when it aborts.
pub const PARTIAL_MARKER: &str = "manifest.partial";
pub const SCHEMA_FILE: &str = "metadata.schema.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub reference_id: String,
    pub slice: usize,
    pub split: Split,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub reference_id: String,
    pub slice: usize,
    pub setting: Setting,
    pub severity: SeverityLevel,
    pub split: Split,
    pub reference_path: String,
    pub degraded_path: String,
    pub metadata_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitAssignment {
    pub fn of(&self, slice: usize) -> Split {
        if self.test.binary_search(&slice).is_ok() {
            Split::Test
        } else {
            Split::Train
        }
    }
}

/// Index of a generated dataset; paths are relative to its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_version: String,
    pub config: GenerationConfig,
    pub splits: SplitAssignment,
    pub references: Vec<ReferenceEntry>,
    pub samples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Seeded shuffle of slice ids; the first `round(fraction · n)` are held out.
pub fn split_slices(num_slices: usize, test_fraction: f64, master_seed: u64) -> SplitAssignment {
    let mut ids: Vec<usize> = (0..num_slices).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, "split"));
    ids.shuffle(&mut rng);
    let n_test = (test_fraction * num_slices as f64).round() as usize;
    let mut test = ids[..n_test].to_vec();
    let mut train = ids[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    SplitAssignment { train, test }
}

pub fn reference_id(slice: usize) -> String {
    format!("slice_{slice:04}")
}

pub fn sample_id(setting: Setting, level: SeverityLevel, slice: usize) -> String {
    format!("{}_{}_{slice:04}", setting.name(), level)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn rel(parts: &[&str]) -> String {
    parts.join("/")
}

struct Job {
    slice: usize,
    setting: Setting,
    level: SeverityLevel,
}

fn generate_sample(
    cfg: &GenerationConfig,
    out: &Path,
    reference: &Image,
    split: Split,
    job: &Job,
) -> Result<ManifestEntry> {
    let setting_name = job.setting.name();
    let seed = sample_seed(cfg.master_seed, job.slice, &setting_name, job.level.get());
    let degraded = match job.setting {
        Setting::Single(kind) => degrade(reference, &[(kind, job.level)], None, seed, &cfg.simulation)?,
        Setting::Mixture(kind) => compose_mixture(
            reference,
            &MixtureConfig::sample(kind, job.level, seed),
            &cfg.simulation,
        )?,
    };
    let ref_id = reference_id(job.slice);
    let id = sample_id(job.setting, job.level, job.slice);
    let level_dir = job.level.to_string();
    let degraded_path = rel(&["degraded", &setting_name, &level_dir, &format!("{ref_id}.ctdi")]);
    let metadata_path = rel(&["meta", &format!("{id}.json")]);
    let reference_path = rel(&["refs", &format!("{ref_id}.ctdi")]);

    save_image(&out.join(&degraded_path), &degraded.image)?;
    let descriptor = if cfg.spectral_descriptor {
        Some(spectral_descriptor(&degraded.image)?.to_base64())
    } else {
        None
    };
    let r = degraded.record;
    let meta = SampleMetadata {
        sample_id: id.clone(),
        reference_id: ref_id.clone(),
        slice: job.slice,
        setting: job.setting,
        split,
        reference_path: reference_path.clone(),
        degraded_path: degraded_path.clone(),
        prompt: describe(&r),
        components: r.components,
        order: r.order,
        mixture_kind: r.mixture_kind,
        severity: r.severity,
        metal_bbox: r.metal_bbox,
        seed: r.seed,
        generator_version: GENERATOR_VERSION.to_string(),
        spectral_descriptor: descriptor,
    };
    meta.check()?;
    write_json(&out.join(&metadata_path), &meta)?;
    Ok(ManifestEntry {
        sample_id: id,
        reference_id: ref_id,
        slice: job.slice,
        setting: job.setting,
        severity: meta.severity,
        split,
        reference_path,
        degraded_path,
        metadata_path,
    })
}

fn run(cfg: &GenerationConfig, out: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(out.join("refs"))?;
    fs::create_dir_all(out.join("meta"))?;
    fs::create_dir_all(out.join("reports"))?;
    for s in &cfg.settings {
        for l in &cfg.levels {
            fs::create_dir_all(out.join("degraded").join(s.name()).join(l.to_string()))?;
        }
    }
    fs::write(out.join(SCHEMA_FILE), METADATA_SCHEMA)?;

    let splits = split_slices(cfg.num_reference_slices, cfg.test_fraction, cfg.master_seed);
    let references: Vec<Image> = (0..cfg.num_reference_slices)
        .into_par_iter()
        .map(|slice| {
            let img = make_phantom(cfg.image_size, phantom_seed(cfg.master_seed, slice))?;
            save_image(&out.join("refs").join(format!("{}.ctdi", reference_id(slice))), &img)?;
            Ok(img)
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<Job> = (0..cfg.num_reference_slices)
        .flat_map(|slice| {
            cfg.settings.iter().flat_map(move |&setting| {
                cfg.levels.iter().map(move |&level| Job {
                    slice,
                    setting,
                    level,
                })
            })
        })
        .collect();
    let results: Vec<Result<ManifestEntry>> = jobs
        .par_iter()
        .map(|job| generate_sample(cfg, out, &references[job.slice], splits.of(job.slice), job))
        .collect();

    let mut samples = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(e) => samples.push(e),
            Err(e) => failures.push(format!(
                "{}: {e}",
                sample_id(job.setting, job.level, job.slice)
            )),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Partial {
            failed: failures.len(),
            total: jobs.len(),
            first: failures.swap_remove(0),
        });
    }

    let references = (0..cfg.num_reference_slices)
        .map(|slice| ReferenceEntry {
            reference_id: reference_id(slice),
            slice,
            split: splits.of(slice),
            path: rel(&["refs", &format!("{}.ctdi", reference_id(slice))]),
        })
        .collect();
    let mut config = cfg.clone();
    // the manifest must not depend on where the dataset was written
    config.output_dir = None;
    Ok(DatasetManifest {
        generator_version: GENERATOR_VERSION.to_string(),
        config,
        splits,
        references,
        samples,
    })
}

/// Generates the dataset under `out`: `refs/`, `degraded/<setting>/L<level>/`,
/// `meta/`, an empty `reports/`, the metadata schema and finally
/// `manifest.json`. While running, and after a failure, `manifest.partial`
/// marks the directory as incomplete.
pub fn generate(cfg: &GenerationConfig, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let marker = out.join(PARTIAL_MARKER);
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path)?;
    }
    fs::write(&marker, "generation in progress\n")?;
    log::info!(
        "generating {} references x {} samples into {}",
        cfg.num_reference_slices,
        cfg.samples_per_reference(),
        out.display()
    );
    match run(cfg, out) {
        Ok(manifest) => {
            write_json(&manifest_path, &manifest)?;
            fs::remove_file(&marker)?;
            Ok(manifest)
        }
        Err(e) => {
            // best effort: the original error matters more than the marker
            let _ = fs::write(&marker, format!("generation failed: {e}\n"));
            Err(e)
        }
    }
}

/// Directory of a manifest file, against which its relative paths resolve.
pub fn dataset_root(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
