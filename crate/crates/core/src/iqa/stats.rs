use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min {
        return Err(Error::InvalidParameter(format!(
            "need at least {min} observations, got {}",
            x.len()
        )));
    }
    crate::error::check_finite(x)?;
    crate::error::check_finite(y)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Product-moment correlation. Zero variance in either input is
/// [`Error::Undefined`].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a constant vector"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation: Pearson of the average-rank vectors.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 3)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Mean absolute and root-mean-square error.
pub fn mae_rmse(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if pred.is_empty() {
        return Err(Error::Empty("severity predictions"));
    }
    check_lengths(pred, truth, 1)?;
    let n = pred.len() as f64;
    let (abs, sq) = pred
        .iter()
        .zip(truth)
        .fold((0.0, 0.0), |(a, s), (p, t)| (a + (p - t).abs(), s + (p - t).powi(2)));
    Ok((abs / n, (sq / n).sqrt()))
}

fn check_labels(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Empty("labels"));
    }
    if pred.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Quadratic weighted kappa over `num_classes` ordinal labels.
///
/// Undefined when the chance-expected weighted disagreement is zero, which
/// happens when both sides put every label in the same class.
pub fn qwk(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    check_labels(pred, truth)?;
    if num_classes < 2 {
        return Err(Error::InvalidParameter("qwk needs at least two classes".into()));
    }
    if let Some(&bad) = pred.iter().chain(truth).find(|&&l| l >= num_classes) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} outside 0..{num_classes}"
        )));
    }
    let k = num_classes;
    let n = pred.len() as f64;
    let mut observed = vec![0.0; k * k];
    let mut hist_true = vec![0.0; k];
    let mut hist_pred = vec![0.0; k];
    for (&p, &t) in pred.iter().zip(truth) {
        observed[t * k + p] += 1.0;
        hist_true[t] += 1.0;
        hist_pred[p] += 1.0;
    }
    let norm = ((k - 1) * (k - 1)) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64) - (j as f64)).powi(2) / norm;
            num += w * observed[i * k + j];
            den += w * hist_true[i] * hist_pred[j] / n;
        }
    }
    if den == 0.0 {
        return Err(Error::Undefined("qwk with single-class marginals"));
    }
    Ok(1.0 - num / den)
}

/// Accuracy and macro-averaged F1 over every class seen in either input.
/// A class with no true positives contributes an F1 of 0.
pub fn accuracy_macro_f1(pred: &[usize], truth: &[usize]) -> Result<(f64, f64)> {
    check_labels(pred, truth)?;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    let classes: BTreeSet<usize> = pred.iter().chain(truth).copied().collect();
    let f1_sum: f64 = classes
        .iter()
        .map(|&c| {
            let tp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t == c).count();
            let fp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t != c).count();
            let fn_ = pred.iter().zip(truth).filter(|&(&p, &t)| p != c && t == c).count();
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        })
        .sum();
    Ok((
        correct as f64 / pred.len() as f64,
        f1_sum / classes.len() as f64,
    ))
}

/// Severity-estimation summary for a set of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityEvalReport {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when undefined for the given labels.
    pub qwk: Option<f64>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Scores continuous severity predictions against integer levels; the
/// predictions are rounded and clamped to `0..num_levels` for the ordinal
/// and classification scores.
pub fn evaluate_severity(
    pred: &[f64],
    truth: &[usize],
    num_levels: usize,
) -> Result<SeverityEvalReport> {
    let truth_f: Vec<f64> = truth.iter().map(|&t| t as f64).collect();
    let (mae, rmse) = mae_rmse(pred, &truth_f)?;
    let top = num_levels.saturating_sub(1) as f64;
    let pred_levels: Vec<usize> = pred.iter().map(|p| p.round().clamp(0.0, top) as usize).collect();
    let qwk = match qwk(&pred_levels, truth, num_levels) {
        Ok(v) => Some(v),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    let (accuracy, macro_f1) = accuracy_macro_f1(&pred_levels, truth)?;
    Ok(SeverityEvalReport {
        mae,
        rmse,
        qwk,
        accuracy,
        macro_f1,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(x: &[f64]) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Err(Error::Empty("values"));
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    Ok((m, var.sqrt()))
}
