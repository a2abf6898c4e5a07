use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::stats::{mean_std, pearson, spearman};
use crate::degrade::{Setting, SeverityLevel};
use crate::error::{Error, Result};

/// Written in place of a correlation that has no value.
pub const UNDEFINED: &str = "undefined";

/// Minimum group size for a correlation row.
pub const MIN_CORRELATION_SAMPLES: usize = 3;

/// One metric value for one degraded sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub setting: Setting,
    pub level: SeverityLevel,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub setting: Setting,
    pub metric: String,
    /// `None` when undefined (constant metric or constant level).
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub setting: Setting,
    pub metric: String,
    pub level: SeverityLevel,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub setting: Setting,
    pub metric: String,
    pub reason: String,
}

/// Correlation of metric values against severity plus severity-wise
/// mean ± std, grouped by setting and metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
    pub levels: Vec<LevelSummary>,
    pub skipped: Vec<SkippedGroup>,
}

fn undefined_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x:.4}"))
}

/// Groups observations by (setting, metric) and correlates value with
/// severity level. Non-finite values are dropped and groups with fewer than
/// three samples are listed in `skipped`.
pub fn severity_correlation_report(observations: &[Observation]) -> Result<CorrelationReport> {
    let mut groups: BTreeMap<(Setting, &str), Vec<(SeverityLevel, f64)>> = BTreeMap::new();
    let mut report = CorrelationReport::default();
    for o in observations {
        let entry = groups.entry((o.setting, o.metric.as_str())).or_default();
        if o.value.is_finite() {
            entry.push((o.level, o.value));
        } else {
            log::warn!("{} {}: dropping non-finite value", o.setting, o.metric);
        }
    }
    for ((setting, metric), samples) in groups {
        let mut by_level: BTreeMap<SeverityLevel, Vec<f64>> = BTreeMap::new();
        for &(l, v) in &samples {
            by_level.entry(l).or_default().push(v);
        }
        for (level, vals) in by_level {
            let (mean, std) = mean_std(&vals)?;
            report.levels.push(LevelSummary {
                setting,
                metric: metric.to_string(),
                level,
                mean,
                std,
                n: vals.len(),
            });
        }
        if samples.len() < MIN_CORRELATION_SAMPLES {
            log::warn!("{setting} {metric}: {} samples, correlation skipped", samples.len());
            report.skipped.push(SkippedGroup {
                setting,
                metric: metric.to_string(),
                reason: format!("{} samples (< {MIN_CORRELATION_SAMPLES})", samples.len()),
            });
            continue;
        }
        let levels: Vec<f64> = samples.iter().map(|s| s.0.get() as f64).collect();
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        report.rows.push(CorrelationRow {
            setting,
            metric: metric.to_string(),
            spearman: undefined_as_none(spearman(&values, &levels))?,
            pearson: undefined_as_none(pearson(&values, &levels))?,
            n: samples.len(),
        });
    }
    Ok(report)
}

impl CorrelationReport {
    pub fn row(&self, setting: Setting, metric: &str) -> Option<&CorrelationRow> {
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.metric == metric)
    }

    fn metrics(&self) -> Vec<&str> {
        let mut m: Vec<&str> = Vec::new();
        for name in self.rows.iter().map(|r| r.metric.as_str()).chain(self.levels.iter().map(|l| l.metric.as_str())) {
            if !m.contains(&name) {
                m.push(name);
            }
        }
        m
    }

    /// `setting,metric,spearman,pearson,n`, one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,metric,spearman,pearson,n\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.setting,
                r.metric,
                fmt_opt(r.spearman),
                fmt_opt(r.pearson),
                r.n
            );
        }
        out
    }

    /// `setting,metric,level,mean,std,n`, one line per level summary.
    pub fn levels_csv(&self) -> String {
        let mut out = String::from("setting,metric,level,mean,std,n\n");
        for l in &self.levels {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{}",
                l.setting, l.metric, l.level, l.mean, l.std, l.n
            );
        }
        out
    }

    /// Settings as rows, one `ρ/r` column per metric, followed by the
    /// severity-wise mean ± std table.
    pub fn to_markdown(&self, title: &str) -> String {
        let metrics = self.metrics();
        let mut out = format!("## {title}\n\n| Setting |");
        for m in &metrics {
            let _ = write!(out, " {} ρ/r |", m.to_uppercase());
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(metrics.len()));
        out.push('\n');
        let mut settings: Vec<Setting> = self.rows.iter().map(|r| r.setting).collect();
        settings.dedup();
        for s in settings {
            let _ = write!(out, "| {s} |");
            for m in &metrics {
                match self.row(s, m) {
                    Some(r) => {
                        let _ = write!(out, " {}/{} |", fmt_opt(r.spearman), fmt_opt(r.pearson));
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }

        out.push_str("\n### Mean ± std by severity\n\n| Setting | Metric | L0 | L1 | L2 | L3 |\n|---|---|---|---|---|---|\n");
        let mut keys: Vec<(Setting, &str)> = self
            .levels
            .iter()
            .map(|l| (l.setting, l.metric.as_str()))
            .collect();
        keys.dedup();
        for (s, m) in keys {
            let _ = write!(out, "| {s} | {m} |");
            for level in SeverityLevel::ALL {
                match self
                    .levels
                    .iter()
                    .find(|l| l.setting == s && l.metric == m && l.level == level)
                {
                    Some(l) => {
                        let _ = write!(out, " {:.4} ± {:.4} |", l.mean, l.std);
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        if !self.skipped.is_empty() {
            out.push_str("\nSkipped groups:\n\n");
            for s in &self.skipped {
                let _ = writeln!(out, "- {} {}: {}", s.setting, s.metric, s.reason);
            }
        }
        out
    }
}
