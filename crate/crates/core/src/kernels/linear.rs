//! Fully-connected layer, forward and backward.

use super::tensor::Tensor;
use crate::error::{Error, Result};

fn check(weights: &Tensor, x_len: usize, bias: usize, op: &'static str) -> Result<(usize, usize)> {
    let shape = weights.shape();
    if shape.len() != 2 {
        return Err(Error::shape(op, format!("weights must be [m,n], got {shape:?}")));
    }
    let (m, n) = (shape[0], shape[1]);
    if x_len != n || bias != m {
        return Err(Error::shape(
            op,
            format!("weights {m}x{n} with input {x_len} and bias {bias}"),
        ));
    }
    Ok((m, n))
}

/// `out = W x + b` with `W` stored row-major `[m, n]`.
pub fn linear_forward(x: &[f64], weights: &Tensor, bias: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = check(weights, x.len(), bias.len(), "linear")?;
    let w = weights.data();
    let mut out = Vec::with_capacity(m);
    for r in 0..m {
        let row = &w[r * n..(r + 1) * n];
        let mut acc = bias[r];
        for j in 0..n {
            acc += row[j] * x[j];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Gradients `(d_x, d_weights, d_bias)` given upstream `d_out`.
pub fn linear_backward(
    x: &[f64],
    weights: &Tensor,
    d_out: &[f64],
) -> Result<(Vec<f64>, Tensor, Vec<f64>)> {
    let (m, n) = check(weights, x.len(), d_out.len(), "linear_backward")?;
    let w = weights.data();
    let mut d_w = Tensor::zeros(weights.shape());
    let dwd = d_w.data_mut();
    let mut d_x = vec![0.0; n];
    for r in 0..m {
        let g = d_out[r];
        let row = &w[r * n..(r + 1) * n];
        let drow = &mut dwd[r * n..(r + 1) * n];
        for j in 0..n {
            drow[j] = g * x[j];
            d_x[j] += g * row[j];
        }
    }
    Ok((d_x, d_w, d_out.to_vec()))
}
