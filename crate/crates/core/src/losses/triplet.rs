//! Triplet loss over squared Euclidean distances.

use super::squared_euclidean;

/// `loss = max(0, d(a,p)^2 - d(a,n)^2 + margin)`.
///
/// Returns `(loss, d_anchor, d_positive, d_negative)`.
pub fn triplet_loss(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
    let d_ap2 = squared_euclidean(anchor, positive);
    let d_an2 = squared_euclidean(anchor, negative);
    let raw = d_ap2 - d_an2 + margin;
    let n = anchor.len();
    if raw <= 0.0 {
        return (0.0, vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    }
    let mut g_a = Vec::with_capacity(n);
    let mut g_p = Vec::with_capacity(n);
    let mut g_n = Vec::with_capacity(n);
    for i in 0..n {
        g_a.push(2.0 * (negative[i] - positive[i]));
        g_p.push(-2.0 * (anchor[i] - positive[i]));
        g_n.push(2.0 * (anchor[i] - negative[i]));
    }
    (raw, g_a, g_p, g_n)
}
