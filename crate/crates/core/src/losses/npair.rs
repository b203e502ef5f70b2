//! Multi-class N-pair loss: one anchor-positive pair against negatives drawn
//! from several classes at once.

use super::dot;
use crate::error::{Error, Result};

/// `loss = log(1 + sum_i exp(a.n_i - a.p))`, log-sum-exp stabilized.
///
/// Returns `(loss, d_anchor, d_positive, d_negatives)`.
pub fn npair_loss(
    anchor: &[f64],
    positive: &[f64],
    negatives: &[&[f64]],
) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    if negatives.is_empty() {
        return Err(Error::Data("npair_loss needs at least one negative".into()));
    }
    let k = anchor.len();
    let ap = dot(anchor, positive);
    let scores: Vec<f64> = negatives.iter().map(|n| dot(anchor, n) - ap).collect();

    // log(exp(0) + sum exp(s_i)) with the implicit zero term included in the max
    let m = scores.iter().copied().fold(0.0f64, f64::max);
    let sum_exp: f64 = (-m).exp() + scores.iter().map(|&s| (s - m).exp()).sum::<f64>();
    let loss = m + sum_exp.ln();

    // softmax weights of each negative term; w_i = exp(s_i) / (1 + sum exp(s_j))
    let weights: Vec<f64> = scores.iter().map(|&s| (s - m).exp() / sum_exp).collect();
    let total_w: f64 = weights.iter().sum();

    let mut d_anchor = vec![0.0; k];
    for (w, n) in weights.iter().zip(negatives) {
        for i in 0..k {
            d_anchor[i] += w * (n[i] - positive[i]);
        }
    }
    let d_positive: Vec<f64> = anchor.iter().map(|&a| -total_w * a).collect();
    let d_negatives: Vec<Vec<f64>> = weights
        .iter()
        .map(|&w| anchor.iter().map(|&a| w * a).collect())
        .collect();
    Ok((loss, d_anchor, d_positive, d_negatives))
}
