use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::generate::{dataset_root, DatasetManifest, ManifestEntry};
use crate::error::Result;
use crate::iqa::{severity_correlation_report, CorrelationReport, MetricName, Observation};
use crate::semantic::{drift_severity_report, image_key, DriftPair, EmbeddingSet};
use crate::tomo::io::load_image;
use crate::tomo::{Image, Mask};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub metrics: Vec<MetricName>,
    /// CTDE file with `img:<reference_id>` and `img:<sample_id>` entries.
    pub embeddings: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub metrics: CorrelationReport,
    pub drift: Option<CorrelationReport>,
    /// Samples or files that could not be evaluated, with the reason.
    pub missing: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl ReportOutcome {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

type SampleValues = std::result::Result<Vec<(MetricName, f64)>, String>;

fn evaluate(
    entry: &ManifestEntry,
    reference: &std::result::Result<Image, String>,
    root: &Path,
    metrics: &[MetricName],
) -> SampleValues {
    let reference = reference.as_ref().map_err(|e| e.clone())?;
    let degraded = load_image(&root.join(&entry.degraded_path))
        .map_err(|e| format!("{}: {}: {e}", entry.sample_id, entry.degraded_path))?;
    let (h, w) = reference.shape();
    let mask = Mask::reconstruction_circle(h, w);
    metrics
        .iter()
        .map(|&m| {
            m.compute(reference, &degraded, &mask)
                .map(|v| (m, v.value))
                .map_err(|e| format!("{}: {m}: {e}", entry.sample_id))
        })
        .collect()
}

fn write(out: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, text)?;
    written.push(path);
    Ok(())
}

/// Computes the selected metrics for every manifest sample (inside the
/// reconstruction circle), then writes per-sample values, correlation
/// tables and severity-wise summaries; with embeddings, also the drift
/// report. Unreadable samples are listed in `missing.txt` and skipped.
pub fn report(manifest_path: &Path, opts: &ReportOptions) -> Result<ReportOutcome> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = dataset_root(manifest_path);
    fs::create_dir_all(&opts.out_dir)?;

    let ref_paths: Vec<&String> = {
        let mut p: Vec<&String> = manifest.samples.iter().map(|s| &s.reference_path).collect();
        p.sort();
        p.dedup();
        p
    };
    let references: BTreeMap<&String, std::result::Result<Image, String>> = ref_paths
        .par_iter()
        .map(|&p| (p, load_image(&root.join(p)).map_err(|e| format!("reference {p}: {e}"))))
        .collect();

    let values: Vec<SampleValues> = manifest
        .samples
        .par_iter()
        .map(|s| evaluate(s, &references[&s.reference_path], &root, &opts.metrics))
        .collect();

    let mut missing = Vec::new();
    let mut observations = Vec::new();
    let mut table = String::from("sample_id,setting,severity");
    for m in &opts.metrics {
        let _ = write!(table, ",{m}");
    }
    table.push('\n');
    for (entry, v) in manifest.samples.iter().zip(&values) {
        match v {
            Ok(vals) => {
                let _ = write!(table, "{},{},{}", entry.sample_id, entry.setting, entry.severity.get());
                for &(m, x) in vals {
                    let _ = write!(table, ",{x:.6}");
                    observations.push(Observation {
                        setting: entry.setting,
                        level: entry.severity,
                        metric: m.name().to_string(),
                        value: x,
                    });
                }
                table.push('\n');
            }
            Err(e) => missing.push(e.clone()),
        }
    }
    missing.dedup();

    let metrics = severity_correlation_report(&observations)?;
    let mut written = Vec::new();
    let out = &opts.out_dir;
    write(out, "samples.csv", &table, &mut written)?;
    write(out, "correlation.csv", &metrics.to_csv(), &mut written)?;
    write(out, "levels.csv", &metrics.levels_csv(), &mut written)?;
    let title = "Correlation of full-reference metrics with severity (Spearman ρ / Pearson r)";
    write(out, "correlation.md", &metrics.to_markdown(title), &mut written)?;

    let drift = match &opts.embeddings {
        None => None,
        Some(path) => {
            let set = EmbeddingSet::load(path)?;
            let mut pairs = Vec::new();
            for s in &manifest.samples {
                match (set.image(&s.reference_id), set.image(&s.sample_id)) {
                    (Some(r), Some(d)) => pairs.push(DriftPair {
                        setting: s.setting,
                        level: s.severity,
                        reference: &r.values,
                        degraded: &d.values,
                    }),
                    (r, _) => {
                        let key = if r.is_none() { &s.reference_id } else { &s.sample_id };
                        missing.push(format!("{}: no embedding {}", s.sample_id, image_key(key)));
                    }
                }
            }
            let report = drift_severity_report(&pairs)?;
            write(out, "drift.csv", &report.to_csv(), &mut written)?;
            write(out, "drift_levels.csv", &report.levels_csv(), &mut written)?;
            let title = "Embedding drift (1 − cosine similarity) vs severity (Spearman ρ / Pearson r)";
            write(out, "drift.md", &report.to_markdown(title), &mut written)?;
            Some(report)
        }
    };

    if !missing.is_empty() {
        log::warn!("{} samples could not be evaluated", missing.len());
        write(out, "missing.txt", &(missing.join("\n") + "\n"), &mut written)?;
    }
    Ok(ReportOutcome {
        metrics,
        drift,
        missing,
        written,
    })
}
