//! Valid (no padding, stride 1) 2-D convolution, forward and backward.
//!
//! Inner loops run over contiguous output rows so the hot path vectorizes.

use super::tensor::Tensor;
use crate::error::{Error, Result};

fn check_conv_shapes(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<[usize; 6]> {
    let (ishape, wshape) = (input.shape(), weights.shape());
    if ishape.len() != 3 || wshape.len() != 4 {
        return Err(Error::shape(
            "conv2d",
            format!("expected input [C,H,W] and weights [Co,Ci,kh,kw], got {ishape:?} and {wshape:?}"),
        ));
    }
    let [c_in, h, w] = [ishape[0], ishape[1], ishape[2]];
    let [c_out, wc_in, kh, kw] = [wshape[0], wshape[1], wshape[2], wshape[3]];
    if wc_in != c_in {
        return Err(Error::shape(
            "conv2d",
            format!("input has {c_in} channels but weights expect {wc_in}"),
        ));
    }
    if bias.len() != c_out {
        return Err(Error::shape(
            "conv2d",
            format!("bias length {} does not match {c_out} output channels", bias.len()),
        ));
    }
    if kh > h || kw > w {
        return Err(Error::shape(
            "conv2d",
            format!("kernel {kh}x{kw} larger than input {h}x{w}"),
        ));
    }
    Ok([c_in, h, w, c_out, kh, kw])
}

/// `output[c,i,j] = bias[c] + sum input window · weights[c]`, valid region only.
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<Tensor> {
    let [c_in, h, w, c_out, kh, kw] = check_conv_shapes(input, weights, bias)?;
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = Tensor::zeros(&[c_out, oh, ow]);

    let x = input.data();
    let wt = weights.data();
    let o = out.data_mut();
    for co in 0..c_out {
        let plane = &mut o[co * oh * ow..(co + 1) * oh * ow];
        plane.fill(bias[co]);
        for ci in 0..c_in {
            let xp = &x[ci * h * w..(ci + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let wv = wt[((co * c_in + ci) * kh + ki) * kw + kj];
                    for i in 0..oh {
                        let src = &xp[(i + ki) * w + kj..(i + ki) * w + kj + ow];
                        let dst = &mut plane[i * ow..(i + 1) * ow];
                        for j in 0..ow {
                            dst[j] += wv * src[j];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of a valid convolution given `d_out = dL/d(output)`.
///
/// Returns `(d_input, d_weights, d_bias)`.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    d_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let ishape = input.shape();
    let wshape = weights.shape();
    let [c_in, h, w] = [ishape[0], ishape[1], ishape[2]];
    let [c_out, kh, kw] = [wshape[0], wshape[2], wshape[3]];
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    if d_out.shape() != [c_out, oh, ow] {
        return Err(Error::shape(
            "conv2d_backward",
            format!("upstream gradient {:?}, expected {:?}", d_out.shape(), [c_out, oh, ow]),
        ));
    }

    let mut d_input = Tensor::zeros(ishape);
    let mut d_weights = Tensor::zeros(wshape);
    let mut d_bias = vec![0.0; c_out];

    let x = input.data();
    let wt = weights.data();
    let g = d_out.data();
    let dx = d_input.data_mut();
    let dw = d_weights.data_mut();

    for co in 0..c_out {
        let gp = &g[co * oh * ow..(co + 1) * oh * ow];
        d_bias[co] = gp.iter().sum();
        for ci in 0..c_in {
            let xp = &x[ci * h * w..(ci + 1) * h * w];
            let dxp = &mut dx[ci * h * w..(ci + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let widx = ((co * c_in + ci) * kh + ki) * kw + kj;
                    let wv = wt[widx];
                    let mut acc = 0.0;
                    for i in 0..oh {
                        let grow = &gp[i * ow..(i + 1) * ow];
                        let base = (i + ki) * w + kj;
                        let xrow = &xp[base..base + ow];
                        let dxrow = &mut dxp[base..base + ow];
                        for j in 0..ow {
                            acc += xrow[j] * grow[j];
                            dxrow[j] += wv * grow[j];
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    Ok((d_input, d_weights, d_bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    /// Direct six-nested-loop evaluation, kept deliberately naive.
    fn conv2d_naive(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Tensor {
        let [c_in, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2]];
        let [c_out, kh, kw] = [weights.shape()[0], weights.shape()[2], weights.shape()[3]];
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        Tensor::from_fn(&[c_out, oh, ow], |idx| {
            let co = idx / (oh * ow);
            let i = (idx / ow) % oh;
            let j = idx % ow;
            let mut acc = bias[co];
            for ci in 0..c_in {
                for ki in 0..kh {
                    for kj in 0..kw {
                        acc += input.data()[ci * h * w + (i + ki) * w + (j + kj)]
                            * weights.data()[((co * c_in + ci) * kh + ki) * kw + kj];
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn constant_field() {
        let input = Tensor::from_vec(&[1, 3, 3], vec![1.0; 9]).unwrap();
        let weights = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0; 4]).unwrap();
        let out = conv2d_forward(&input, &weights, &[0.0]).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert!(out.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn identity_kernel() {
        let input = Tensor::from_fn(&[1, 4, 5], |i| i as f64 * 0.37 - 2.0);
        let weights = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let out = conv2d_forward(&input, &weights, &[0.0]).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn matches_naive_loop_oracle() {
        let mut r = rng::stream(11);
        for _ in 0..5 {
            let mut input = Tensor::zeros(&[2, 8, 8]);
            rng::fill_gaussian(&mut r, input.data_mut());
            let mut weights = Tensor::zeros(&[3, 2, 3, 3]);
            rng::fill_gaussian(&mut r, weights.data_mut());
            let mut bias = vec![0.0; 3];
            rng::fill_gaussian(&mut r, &mut bias);

            let fast = conv2d_forward(&input, &weights, &bias).unwrap();
            let slow = conv2d_naive(&input, &weights, &bias);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let input = Tensor::zeros(&[2, 8, 8]);
        let weights = Tensor::zeros(&[3, 1, 3, 3]);
        let err = conv2d_forward(&input, &weights, &[0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }), "{err}");
        let weights = Tensor::zeros(&[3, 2, 9, 3]);
        assert!(conv2d_forward(&input, &weights, &[0.0; 3]).is_err());
    }
}
