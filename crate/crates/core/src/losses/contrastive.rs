//! Single and double margin contrastive losses over embedding pairs.

use super::euclidean;

/// Single margin contrastive loss.
///
/// `loss = y*d^2 + (1-y)*max(0, m - d)^2` with `d = ||a - b||`.
/// Returns `(loss, d_a, d_b)`. At the non-differentiable point `d = 0` of the
/// dissimilar branch the subgradient 0 is used.
pub fn contrastive_sm(a: &[f64], b: &[f64], same: bool, margin: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let d = euclidean(a, b);
    if same {
        let loss = d * d;
        let d_a: Vec<f64> = a.iter().zip(b).map(|(x, y)| 2.0 * (x - y)).collect();
        let d_b: Vec<f64> = d_a.iter().map(|g| -g).collect();
        (loss, d_a, d_b)
    } else {
        let slack = margin - d;
        if slack <= 0.0 || d == 0.0 {
            let loss = if d == 0.0 && slack > 0.0 {
                slack * slack
            } else {
                0.0
            };
            (loss, vec![0.0; a.len()], vec![0.0; b.len()])
        } else {
            let loss = slack * slack;
            // dL/dd = -2*slack, dd/da = (a-b)/d
            let scale = -2.0 * slack / d;
            let d_a: Vec<f64> = a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect();
            let d_b: Vec<f64> = d_a.iter().map(|g| -g).collect();
            (loss, d_a, d_b)
        }
    }
}

/// Double margin contrastive loss.
///
/// `loss = y*max(0, d - m1)^2 + (1-y)*max(0, m2 - d)^2`.
pub fn contrastive_dm(
    a: &[f64],
    b: &[f64],
    same: bool,
    m1: f64,
    m2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let d = euclidean(a, b);
    let zero = || (vec![0.0; a.len()], vec![0.0; b.len()]);
    if same {
        let excess = d - m1;
        if excess <= 0.0 {
            let (ga, gb) = zero();
            return (0.0, ga, gb);
        }
        let loss = excess * excess;
        let scale = 2.0 * excess / d; // d >= m1 > 0 here
        let d_a: Vec<f64> = a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect();
        let d_b: Vec<f64> = d_a.iter().map(|g| -g).collect();
        (loss, d_a, d_b)
    } else {
        let slack = m2 - d;
        if slack <= 0.0 {
            let (ga, gb) = zero();
            return (0.0, ga, gb);
        }
        let loss = slack * slack;
        if d == 0.0 {
            let (ga, gb) = zero();
            return (loss, ga, gb);
        }
        let scale = -2.0 * slack / d;
        let d_a: Vec<f64> = a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect();
        let d_b: Vec<f64> = d_a.iter().map(|g| -g).collect();
        (loss, d_a, d_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn sm_identical_similar_pair_is_zero() {
        let a = [0.3, -0.7, 1.1];
        let (loss, ga, gb) = contrastive_sm(&a, &a, true, 1.0);
        assert_eq!(loss, 0.0);
        assert!(ga.iter().chain(&gb).all(|&g| g == 0.0));
    }

    #[test]
    fn sm_far_dissimilar_pair_is_zero() {
        let a = [0.0, 0.0];
        let b = [3.0, 4.0]; // d = 5 >= m
        let (loss, ga, _) = contrastive_sm(&a, &b, false, 1.0);
        assert_eq!(loss, 0.0);
        assert!(ga.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn sm_dissimilar_inside_margin() {
        // d = 0.5, y = 0, m = 1 -> (1 - 0.5)^2 = 0.25
        let a = [0.0];
        let b = [0.5];
        let (loss, _, _) = contrastive_sm(&a, &b, false, 1.0);
        assert!((loss - 0.25).abs() < 1e-12);
    }

    #[test]
    fn dm_zero_cases() {
        let a = [0.0, 0.0];
        let b = [0.3, 0.0]; // d = 0.3 <= m1
        assert_eq!(contrastive_dm(&a, &b, true, 0.5, 0.5).0, 0.0);
        let c = [0.9, 0.0]; // d = 0.9 >= m2
        assert_eq!(contrastive_dm(&a, &c, false, 0.5, 0.5).0, 0.0);
    }

    #[test]
    fn dm_similar_beyond_margin() {
        // y = 1, d = 1.0, m1 = 0.5 -> 0.25
        let a = [0.0];
        let b = [1.0];
        let (loss, _, _) = contrastive_dm(&a, &b, true, 0.5, 0.5);
        assert!((loss - 0.25).abs() < 1e-12);
    }

    fn fd_check(
        f: &dyn Fn(&[f64], &[f64]) -> f64,
        grad_a: &[f64],
        grad_b: &[f64],
        a: &[f64],
        b: &[f64],
    ) {
        let h = 1e-6;
        for i in 0..a.len() {
            let mut up = a.to_vec();
            up[i] += h;
            let mut dn = a.to_vec();
            dn[i] -= h;
            let numeric = (f(&up, b) - f(&dn, b)) / (2.0 * h);
            let denom = grad_a[i].abs().max(numeric.abs()).max(1e-6);
            assert!(
                ((grad_a[i] - numeric) / denom).abs() < 1e-5,
                "a[{i}]: analytic {} numeric {}",
                grad_a[i],
                numeric
            );
        }
        for i in 0..b.len() {
            let mut up = b.to_vec();
            up[i] += h;
            let mut dn = b.to_vec();
            dn[i] -= h;
            let numeric = (f(a, &up) - f(a, &dn)) / (2.0 * h);
            let denom = grad_b[i].abs().max(numeric.abs()).max(1e-6);
            assert!(((grad_b[i] - numeric) / denom).abs() < 1e-5);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut r = rng::stream(51);
        for trial in 0..20 {
            let mut a = vec![0.0; 4];
            let mut b = vec![0.0; 4];
            rng::fill_gaussian(&mut r, &mut a);
            rng::fill_gaussian(&mut r, &mut b);
            let same = trial % 2 == 0;

            let (_, ga, gb) = contrastive_sm(&a, &b, same, 1.0);
            fd_check(&|x, y| contrastive_sm(x, y, same, 1.0).0, &ga, &gb, &a, &b);

            let (_, ga, gb) = contrastive_dm(&a, &b, same, 0.5, 0.5);
            fd_check(&|x, y| contrastive_dm(x, y, same, 0.5, 0.5).0, &ga, &gb, &a, &b);
        }
    }
}
