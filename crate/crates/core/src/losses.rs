//! Multi-task training objective over supplied predictions and embeddings:
//! classification, severity regression, pairwise ranking and supervised
//! contrastive terms, each with an analytic gradient.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_reg: f64,
    pub lambda_rank: f64,
    pub lambda_con: f64,
    /// Ranking margin in severity units.
    pub margin: f64,
    pub temperature: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_reg: 1.0,
            lambda_rank: 0.3,
            lambda_con: 0.05,
            margin: 0.5,
            temperature: 0.07,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lambda_reg,
            self.lambda_rank,
            self.lambda_con,
            self.margin,
            self.temperature,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite
            || self.lambda_reg < 0.0
            || self.lambda_rank < 0.0
            || self.lambda_con < 0.0
            || self.margin < 0.0
            || self.temperature <= 0.0
        {
            return Err(Error::InvalidParameter(format!("invalid loss weights {self:?}")));
        }
        Ok(())
    }
}

fn log_sum_exp(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = x.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + x.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits.iter().copied());
    logits.iter().map(|l| (l - lse).exp()).collect()
}

fn check_class(logits: &[f64], target: usize) -> Result<()> {
    if logits.len() < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    if target >= logits.len() {
        return Err(Error::InvalidParameter(format!(
            "class {target} out of range for {} logits",
            logits.len()
        )));
    }
    check_finite(logits)
}

/// `−log softmax(logits)[target]`.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    check_class(logits, target)?;
    Ok(log_sum_exp(logits.iter().copied()) - logits[target])
}

/// Gradient of [`cross_entropy`] with respect to the logits.
pub fn cross_entropy_grad(logits: &[f64], target: usize) -> Result<Vec<f64>> {
    check_class(logits, target)?;
    let mut g = softmax(logits);
    g[target] -= 1.0;
    Ok(g)
}

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Empty("severity predictions"));
    }
    if pred.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    check_finite(pred)?;
    check_finite(truth)
}

/// Mean Huber loss with unit threshold.
pub fn smooth_l1(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let e = (p - t).abs();
            if e < 1.0 {
                0.5 * e * e
            } else {
                e - 0.5
            }
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

pub fn smooth_l1_grad(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    check_pair(pred, truth)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let e = p - t;
            (if e.abs() < 1.0 { e } else { e.signum() }) / n
        })
        .collect())
}

/// Value of a loss defined as a mean over a set that may be empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedLoss {
    pub value: f64,
    /// Number of averaged terms; 0 means the loss was defined as 0.
    pub terms: usize,
}

impl AveragedLoss {
    pub fn is_empty(&self) -> bool {
        self.terms == 0
    }
}

/// Hinge `max(0, m − (ŝ_i − ŝ_j))` averaged over pairs with `s_i > s_j`.
pub fn rank_loss(pred: &[f64], truth: &[f64], margin: f64) -> Result<AveragedLoss> {
    check_pair(pred, truth)?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..pred.len() {
        for j in 0..pred.len() {
            if truth[i] > truth[j] {
                sum += (margin - (pred[i] - pred[j])).max(0.0);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        log::debug!("rank loss: batch has no ordered pairs");
        return Ok(AveragedLoss { value: 0.0, terms: 0 });
    }
    Ok(AveragedLoss {
        value: sum / pairs as f64,
        terms: pairs,
    })
}

pub fn rank_loss_grad(pred: &[f64], truth: &[f64], margin: f64) -> Result<Vec<f64>> {
    check_pair(pred, truth)?;
    let mut g = vec![0.0; pred.len()];
    let pairs = truth
        .iter()
        .map(|a| truth.iter().filter(|b| a > b).count())
        .sum::<usize>();
    if pairs == 0 {
        return Ok(g);
    }
    let w = 1.0 / pairs as f64;
    for i in 0..pred.len() {
        for j in 0..pred.len() {
            if truth[i] > truth[j] && margin - (pred[i] - pred[j]) > 0.0 {
                g[i] -= w;
                g[j] += w;
            }
        }
    }
    Ok(g)
}

struct Normalized {
    units: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

fn normalize_all(embeddings: &[Vec<f64>]) -> Result<Normalized> {
    let dim = embeddings.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Empty("embeddings"));
    }
    let mut units = Vec::with_capacity(embeddings.len());
    let mut norms = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        if e.len() != dim {
            return Err(Error::InvalidParameter("embeddings differ in dimension".into()));
        }
        check_finite(e)?;
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::Degenerate("zero-norm embedding".into()));
        }
        units.push(e.iter().map(|v| v / n).collect());
        norms.push(n);
    }
    Ok(Normalized { units, norms })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_supcon<L>(embeddings: &[Vec<f64>], labels: &[L], temperature: f64) -> Result<()> {
    if embeddings.len() < 2 {
        return Err(Error::InvalidParameter("contrastive loss needs at least two samples".into()));
    }
    if embeddings.len() != labels.len() {
        return Err(Error::InvalidParameter("one label per embedding required".into()));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidParameter(format!("temperature {temperature}")));
    }
    Ok(())
}

/// Per-anchor pieces shared by the loss and its gradient.
struct Anchor {
    index: usize,
    positives: Vec<usize>,
    /// Softmax over `a ≠ i` of `z_i·z_a/τ`, indexed by sample (0 at `i`).
    weights: Vec<f64>,
    log_denominator: f64,
}

fn anchors<L: PartialEq>(units: &[Vec<f64>], labels: &[L], tau: f64) -> Vec<Anchor> {
    let n = units.len();
    (0..n)
        .filter_map(|i| {
            let positives: Vec<usize> = (0..n).filter(|&p| p != i && labels[p] == labels[i]).collect();
            if positives.is_empty() {
                return None;
            }
            let logits: Vec<f64> = (0..n).map(|a| dot(&units[i], &units[a]) / tau).collect();
            let others = (0..n).filter(|&a| a != i).map(|a| logits[a]);
            let log_denominator = log_sum_exp(others);
            let weights = (0..n)
                .map(|a| if a == i { 0.0 } else { (logits[a] - log_denominator).exp() })
                .collect();
            Some(Anchor {
                index: i,
                positives,
                weights,
                log_denominator,
            })
        })
        .collect()
}

/// Supervised contrastive loss on unit-normalised embeddings. Samples with
/// equal labels are positives; anchors without a positive are left out of
/// the average, and a batch with no such anchor gives 0.
pub fn supcon_loss<L: PartialEq>(
    embeddings: &[Vec<f64>],
    labels: &[L],
    temperature: f64,
) -> Result<AveragedLoss> {
    check_supcon(embeddings, labels, temperature)?;
    let z = normalize_all(embeddings)?;
    let anchors = anchors(&z.units, labels, temperature);
    if anchors.is_empty() {
        log::debug!("contrastive loss: no anchor has a positive");
        return Ok(AveragedLoss { value: 0.0, terms: 0 });
    }
    let total: f64 = anchors
        .iter()
        .map(|a| {
            let i = a.index;
            let mean_log_prob = a
                .positives
                .iter()
                .map(|&p| dot(&z.units[i], &z.units[p]) / temperature - a.log_denominator)
                .sum::<f64>()
                / a.positives.len() as f64;
            -mean_log_prob
        })
        .sum();
    Ok(AveragedLoss {
        value: total / anchors.len() as f64,
        terms: anchors.len(),
    })
}

/// Gradient of [`supcon_loss`] with respect to the raw (unnormalised)
/// embeddings.
pub fn supcon_grad<L: PartialEq>(
    embeddings: &[Vec<f64>],
    labels: &[L],
    temperature: f64,
) -> Result<Vec<Vec<f64>>> {
    check_supcon(embeddings, labels, temperature)?;
    let z = normalize_all(embeddings)?;
    let dim = z.units[0].len();
    let n = z.units.len();
    let anchors = anchors(&z.units, labels, temperature);
    let mut g = vec![vec![0.0; dim]; n];
    if anchors.is_empty() {
        return Ok(g);
    }
    let scale = 1.0 / (anchors.len() as f64 * temperature);
    for a in &anchors {
        let i = a.index;
        let inv_p = 1.0 / a.positives.len() as f64;
        // coefficient of u_k in ∂L/∂u_i, and of u_i in ∂L/∂u_k
        let mut coef = a.weights.clone();
        for &p in &a.positives {
            coef[p] -= inv_p;
        }
        for k in 0..n {
            if k == i || coef[k] == 0.0 {
                continue;
            }
            let c = coef[k] * scale;
            for d in 0..dim {
                g[i][d] += c * z.units[k][d];
                g[k][d] += c * z.units[i][d];
            }
        }
    }
    // back through x ↦ x/‖x‖
    for (k, gk) in g.iter_mut().enumerate() {
        let u = &z.units[k];
        let proj = dot(u, gk);
        for d in 0..dim {
            gk[d] = (gk[d] - proj * u[d]) / z.norms[k];
        }
    }
    Ok(g)
}

/// The four objective terms before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    pub cls: f64,
    pub reg: f64,
    pub rank: f64,
    pub con: f64,
}

/// `cls + λ_reg·reg + λ_rank·rank + λ_con·con`.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> Result<f64> {
    check_finite(&[c.cls, c.reg, c.rank, c.con])?;
    w.validate()?;
    Ok(c.cls + w.lambda_reg * c.reg + w.lambda_rank * c.rank + w.lambda_con * c.con)
}

/// Model outputs and targets for one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub logits: Vec<Vec<f64>>,
    pub pred_severity: Vec<f64>,
    pub true_class: Vec<usize>,
    pub true_severity: Vec<f64>,
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchGradient {
    pub logits: Vec<Vec<f64>>,
    pub pred_severity: Vec<f64>,
    pub embeddings: Vec<Vec<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Empty("batch"));
        }
        if [
            self.pred_severity.len(),
            self.true_class.len(),
            self.true_severity.len(),
            self.embeddings.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::InvalidParameter("batch fields differ in length".into()));
        }
        Ok(())
    }

    /// Contrastive labels: class and integer severity level.
    fn labels(&self) -> Vec<(usize, i64)> {
        self.true_class
            .iter()
            .zip(&self.true_severity)
            .map(|(&c, &s)| (c, s.round() as i64))
            .collect()
    }

    pub fn components(&self, w: &LossWeights) -> Result<LossComponents> {
        self.validate()?;
        let n = self.len() as f64;
        let cls = self
            .logits
            .iter()
            .zip(&self.true_class)
            .map(|(l, &y)| cross_entropy(l, y))
            .sum::<Result<f64>>()?
            / n;
        Ok(LossComponents {
            cls,
            reg: smooth_l1(&self.pred_severity, &self.true_severity)?,
            rank: rank_loss(&self.pred_severity, &self.true_severity, w.margin)?.value,
            con: supcon_loss(&self.embeddings, &self.labels(), w.temperature)?.value,
        })
    }

    pub fn loss(&self, w: &LossWeights) -> Result<f64> {
        total_loss(&self.components(w)?, w)
    }

    /// Gradient of [`Batch::loss`] with respect to logits, predicted
    /// severities and raw embeddings.
    pub fn gradient(&self, w: &LossWeights) -> Result<BatchGradient> {
        self.validate()?;
        w.validate()?;
        let n = self.len() as f64;
        let logits = self
            .logits
            .iter()
            .zip(&self.true_class)
            .map(|(l, &y)| Ok(cross_entropy_grad(l, y)?.into_iter().map(|g| g / n).collect()))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let reg = smooth_l1_grad(&self.pred_severity, &self.true_severity)?;
        let rank = rank_loss_grad(&self.pred_severity, &self.true_severity, w.margin)?;
        let pred_severity = reg
            .iter()
            .zip(&rank)
            .map(|(r, k)| w.lambda_reg * r + w.lambda_rank * k)
            .collect();
        let embeddings = supcon_grad(&self.embeddings, &self.labels(), w.temperature)?
            .into_iter()
            .map(|g| g.into_iter().map(|v| w.lambda_con * v).collect())
            .collect();
        Ok(BatchGradient {
            logits,
            pred_severity,
            embeddings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_examples() {
        let ce = cross_entropy(&[0.3; 5], 2).unwrap();
        assert!((ce - 5f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[800.0, 0.0, -3.0], 0).unwrap() < 1e-300);
        assert!(cross_entropy(&[1.0, 2.0], 2).is_err());
        let shifted = cross_entropy(&[1.3, 1002.0, 1000.0], 1).unwrap();
        let base = cross_entropy(&[1.3 - 1000.0, 2.0, 0.0], 1).unwrap();
        assert!((shifted - base).abs() < 1e-9);
    }

    #[test]
    fn smooth_l1_examples() {
        assert_eq!(smooth_l1(&[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(smooth_l1(&[0.5], &[0.0]).unwrap(), 0.125);
        assert_eq!(smooth_l1(&[0.0], &[2.0]).unwrap(), 1.5);
        assert_eq!(smooth_l1(&[0.5, 0.0], &[0.0, 2.0]).unwrap(), (0.125 + 1.5) / 2.0);
    }

    #[test]
    fn rank_examples() {
        let r = rank_loss(&[2.0, 1.0, 0.0], &[2.0, 1.0, 0.0], 0.5).unwrap();
        assert_eq!((r.value, r.terms), (0.0, 3));
        assert_eq!(rank_loss(&[0.7, 0.7], &[1.0, 0.0], 0.5).unwrap().value, 0.5);
        let none = rank_loss(&[0.1, 0.9], &[1.0, 1.0], 0.5).unwrap();
        assert!(none.is_empty() && none.value == 0.0);
        let a = rank_loss(&[0.2, 0.4, 1.0], &[0.0, 1.0, 2.0], 0.5).unwrap().value;
        let b = rank_loss(&[10.2, 10.4, 11.0], &[0.0, 1.0, 2.0], 0.5).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn supcon_without_positives_is_zero() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let l = supcon_loss(&e, &[0, 1], 0.1).unwrap();
        assert!(l.is_empty() && l.value == 0.0);
        assert!(supcon_loss(&e[..1], &[0], 0.1).is_err());
    }

    #[test]
    fn total_examples() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&LossComponents::default(), &w).unwrap(), 0.0);
        let one = LossComponents {
            cls: 1.0,
            reg: 1.0,
            rank: 1.0,
            con: 1.0,
        };
        assert!((total_loss(&one, &w).unwrap() - 2.35).abs() < 1e-15);
        let bad = LossWeights {
            temperature: 0.0,
            ..w
        };
        assert!(total_loss(&one, &bad).is_err());
    }

    #[test]
    fn weights_json_round_trip() {
        let w = LossWeights::default();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(serde_json::from_str::<LossWeights>(&s).unwrap(), w);
        assert!(serde_json::from_str::<LossWeights>(r#"{"lambda_reg":1}"#).is_err());
    }
}
