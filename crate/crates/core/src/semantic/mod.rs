//! Training-free quality axis over externally computed embeddings: prompt
//! prototypes, global and patch scores, pooling and embedding drift.

mod ctde;

pub use ctde::{image_key, patch_key, prompt_key, EmbeddingSet, PromptSet, CTDE_VERSION};

use serde::{Deserialize, Serialize};

use crate::degrade::{Setting, SeverityLevel};
use crate::error::{check_finite, Error, Result};
use crate::iqa::{severity_correlation_report, CorrelationReport, Observation};

/// Metric name used for drift rows in correlation reports.
pub const DRIFT_METRIC: &str = "drift";

/// Prompts describing artifact-free diagnostic images.
pub const DEFAULT_HIGH_PROMPTS: [&str; 3] = [
    "Axial abdominal CT slice with excellent diagnostic quality, sharp boundaries, clear organ detail, and no visible artifacts.",
    "Diagnostic abdominal CT with clear anatomical structures, low noise, high contrast, and no streak artifacts.",
    "High-quality CT image with sharp edges, clean appearance, and good visibility of abdominal organs.",
];

/// Prompts describing noise, blur, streak, aliasing and metal degradations.
pub const DEFAULT_LOW_PROMPTS: [&str; 5] = [
    "Abdominal CT slice with severe noise and grainy appearance that reduces visibility of anatomical structures.",
    "Abdominal CT slice with strong blur and significant loss of sharpness.",
    "Abdominal CT slice with strong streak artifacts and reduced diagnostic quality.",
    "Abdominal CT slice with sparse-view aliasing artifacts and distorted anatomical structures.",
    "Abdominal CT slice with strong metal artifacts causing bright streaks and severe image corruption.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub name: String,
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("embedding values"));
        }
        check_finite(&values)?;
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn normalized(&self) -> Result<Vec<f64>> {
        normalize(&self.values)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Unit-norm copy; zero or non-finite vectors are rejected.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    check_finite(v)?;
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Degenerate("zero-norm embedding".into()));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn mean_of_normalized(set: &[&[f64]], what: &'static str) -> Result<Vec<f64>> {
    let first = set.first().ok_or(Error::Empty(what))?;
    let mut acc = vec![0.0; first.len()];
    for v in set {
        check_dims(first, v)?;
        for (a, x) in acc.iter_mut().zip(normalize(v)?) {
            *a += x;
        }
    }
    let n = set.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Means of the normalised high- and low-quality prompt embeddings.
pub fn prototypes(high: &[&[f64]], low: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mu_h = mean_of_normalized(high, "high-quality prompts")?;
    let mu_l = mean_of_normalized(low, "low-quality prompts")?;
    check_dims(&mu_h, &mu_l)?;
    Ok((mu_h, mu_l))
}

/// Unit direction from the low- to the high-quality prototype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAxis {
    q: Vec<f64>,
    /// Norms of the high and low prototypes the axis was built from.
    pub prototype_norms: (f64, f64),
}

impl QualityAxis {
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Axis from the prompt entries of an embedding set.
    pub fn from_prompts(set: &EmbeddingSet) -> Result<Self> {
        let high: Vec<&[f64]> = set.prompts(PromptSet::High).iter().map(|e| e.values.as_slice()).collect();
        let low: Vec<&[f64]> = set.prompts(PromptSet::Low).iter().map(|e| e.values.as_slice()).collect();
        let (mu_h, mu_l) = prototypes(&high, &low)?;
        quality_axis(&mu_h, &mu_l)
    }
}

pub fn quality_axis(mu_h: &[f64], mu_l: &[f64]) -> Result<QualityAxis> {
    check_dims(mu_h, mu_l)?;
    check_finite(mu_h)?;
    check_finite(mu_l)?;
    let diff: Vec<f64> = mu_h.iter().zip(mu_l).map(|(h, l)| h - l).collect();
    let n = norm(&diff);
    if n < 1e-9 {
        return Err(Error::Degenerate("prototypes coincide; no quality axis".into()));
    }
    Ok(QualityAxis {
        q: diff.into_iter().map(|d| d / n).collect(),
        prototype_norms: (norm(mu_h), norm(mu_l)),
    })
}

/// Projection of the normalised embedding onto the axis.
pub fn global_score(z: &[f64], axis: &QualityAxis) -> Result<f64> {
    check_dims(z, &axis.q)?;
    Ok(dot(&normalize(z)?, &axis.q).clamp(-1.0, 1.0))
}

/// Per-patch scores in token order.
pub fn patch_scores(tokens: &[&[f64]], axis: &QualityAxis) -> Result<Vec<f64>> {
    tokens.iter().map(|t| global_score(t, axis)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledScores {
    pub mean: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn pool(scores: &[f64]) -> Result<PooledScores> {
    let (mean, std) = crate::iqa::mean_std(scores)?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PooledScores { mean, max, std })
}

/// Global score, patch scores and their pooled summary for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticFeatures {
    pub s_global: f64,
    pub patch_scores: Vec<f64>,
    /// `None` when the image has no patch tokens.
    pub pooled: Option<PooledScores>,
}

impl SemanticFeatures {
    /// `[s_global, mean, max, std]`; pooled entries are 0 without patches.
    pub fn to_vec(&self) -> Vec<f64> {
        let p = self.pooled.unwrap_or(PooledScores {
            mean: 0.0,
            max: 0.0,
            std: 0.0,
        });
        vec![self.s_global, p.mean, p.max, p.std]
    }
}

pub fn semantic_features(
    z: &[f64],
    tokens: &[&[f64]],
    axis: &QualityAxis,
) -> Result<SemanticFeatures> {
    let scores = patch_scores(tokens, axis)?;
    let pooled = if scores.is_empty() {
        None
    } else {
        Some(pool(&scores)?)
    };
    Ok(SemanticFeatures {
        s_global: global_score(z, axis)?,
        patch_scores: scores,
        pooled,
    })
}

/// `1 − cos(z_ref, z_deg)`, in [0, 2].
pub fn embedding_drift(z_ref: &[f64], z_deg: &[f64]) -> Result<f64> {
    check_dims(z_ref, z_deg)?;
    check_finite(z_ref)?;
    check_finite(z_deg)?;
    let (aa, bb) = (dot(z_ref, z_ref), dot(z_deg, z_deg));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Degenerate("zero-norm embedding".into()));
    }
    // sqrt(aa·bb) rather than sqrt(aa)·sqrt(bb) keeps drift(z, ±z) exact
    let cos = dot(z_ref, z_deg) / (aa * bb).sqrt();
    Ok(1.0 - cos.clamp(-1.0, 1.0))
}

/// Reference and degraded embeddings of one sample.
#[derive(Debug, Clone, Copy)]
pub struct DriftPair<'a> {
    pub setting: Setting,
    pub level: SeverityLevel,
    pub reference: &'a [f64],
    pub degraded: &'a [f64],
}

/// Correlation of drift with severity per setting, plus level-wise
/// mean ± std, under the metric name [`DRIFT_METRIC`].
pub fn drift_severity_report(pairs: &[DriftPair<'_>]) -> Result<CorrelationReport> {
    let observations = pairs
        .iter()
        .map(|p| {
            Ok(Observation {
                setting: p.setting,
                level: p.level,
                metric: DRIFT_METRIC.to_string(),
                value: embedding_drift(p.reference, p.degraded)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    severity_correlation_report(&observations)
}
