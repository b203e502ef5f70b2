//! Softmax and softmax cross-entropy with max-subtraction stabilization.

use crate::error::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of the softmax against a one-hot target.
///
/// Returns `(loss, dL/d_logits)` where the gradient is `softmax - onehot`.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(Error::shape(
            "softmax_xent",
            format!("need at least 2 classes, got {}", logits.len()),
        ));
    }
    if target >= logits.len() {
        return Err(Error::shape(
            "softmax_xent",
            format!("target {target} out of range for {} classes", logits.len()),
        ));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|&v| v - max).collect();
    let log_sum: f64 = shifted.iter().map(|&v| v.exp()).sum::<f64>().ln();
    let loss = log_sum - shifted[target];
    let mut grad: Vec<f64> = shifted.iter().map(|&v| (v - log_sum).exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}
