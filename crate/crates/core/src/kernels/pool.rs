//! 2x2 max pooling with recorded argmax indices for backward routing.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Max-pools each channel over non-overlapping 2x2 windows.
///
/// Ties resolve to the first element in row-major window order, so backward
/// routing is deterministic. Returns the pooled tensor and, per output cell,
/// the flat index of the winning input element.
pub fn maxpool2_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let shape = input.shape();
    if shape.len() != 3 {
        return Err(Error::shape(
            "maxpool2",
            format!("expected [C,H,W], got {shape:?}"),
        ));
    }
    let [c, h, w] = [shape[0], shape[1], shape[2]];
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(
            "maxpool2",
            format!("H and W must be even, got {h}x{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    let x = input.data();
    let o = out.data_mut();

    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let base = ch * h * w + 2 * i * w + 2 * j;
                let window = [base, base + 1, base + w, base + w + 1];
                let mut best = window[0];
                for &idx in &window[1..] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                let oidx = ch * oh * ow + i * ow + j;
                o[oidx] = x[best];
                argmax[oidx] = best;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes the upstream gradient back to the recorded argmax positions.
pub fn maxpool2_backward(input_shape: &[usize], argmax: &[usize], d_out: &Tensor) -> Result<Tensor> {
    if d_out.len() != argmax.len() {
        return Err(Error::shape(
            "maxpool2_backward",
            format!("{} gradient cells vs {} indices", d_out.len(), argmax.len()),
        ));
    }
    let mut d_input = Tensor::zeros(input_shape);
    let dx = d_input.data_mut();
    for (g, &idx) in d_out.data().iter().zip(argmax) {
        dx[idx] += g;
    }
    Ok(d_input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_window() {
        let input = Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, argmax) = maxpool2_forward(&input).unwrap();
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(argmax, vec![3]);
    }

    #[test]
    fn ties_pick_first_row_major() {
        let input = Tensor::from_vec(&[1, 2, 2], vec![5.0; 4]).unwrap();
        let (out, argmax) = maxpool2_forward(&input).unwrap();
        assert_eq!(out.data(), &[5.0]);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn matches_window_scan_oracle() {
        let mut r = rng::stream(21);
        let mut input = Tensor::zeros(&[1, 6, 6]);
        rng::fill_gaussian(&mut r, input.data_mut());
        let (out, _) = maxpool2_forward(&input).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut m = f64::NEG_INFINITY;
                for di in 0..2 {
                    for dj in 0..2 {
                        m = m.max(input.data()[(2 * i + di) * 6 + 2 * j + dj]);
                    }
                }
                assert_eq!(out.data()[i * 3 + j], m);
            }
        }
    }

    #[test]
    fn odd_dimensions_rejected() {
        let input = Tensor::zeros(&[1, 3, 4]);
        assert!(maxpool2_forward(&input).is_err());
    }

    #[test]
    fn backward_routes_to_argmax() {
        let input = Tensor::from_vec(&[1, 2, 4], vec![1.0, 9.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let (_, argmax) = maxpool2_forward(&input).unwrap();
        let d_out = Tensor::from_vec(&[1, 1, 2], vec![10.0, 20.0]).unwrap();
        let d_in = maxpool2_backward(&[1, 2, 4], &argmax, &d_out).unwrap();
        // winners: index 1 (value 9) and index 7 (value 8)
        assert_eq!(d_in.data(), &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 20.0]);
    }
}
