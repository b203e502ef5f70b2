//! Parametric ReLU with one learnable slope per channel.
//!
//! The same kernel serves convolutional maps (`plane = H*W`) and linear
//! features (`plane = 1`): input element `i` belongs to channel `i / plane`.

use crate::error::{Error, Result};

fn check(x_len: usize, slopes: usize, plane: usize, op: &'static str) -> Result<()> {
    if plane == 0 || x_len != slopes * plane {
        return Err(Error::shape(
            op,
            format!("{x_len} values vs {slopes} slopes with plane size {plane}"),
        ));
    }
    Ok(())
}

/// `out = x` for `x >= 0`, `slope * x` otherwise.
pub fn prelu_forward(x: &[f64], slopes: &[f64], plane: usize) -> Result<Vec<f64>> {
    check(x.len(), slopes.len(), plane, "prelu")?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &v)| if v >= 0.0 { v } else { slopes[i / plane] * v })
        .collect())
}

/// Gradients wrt input and slopes given the forward pre-activation `x`.
///
/// `d_slopes` accumulates `d_out * x` over the negative positions of each channel.
pub fn prelu_backward(
    x: &[f64],
    slopes: &[f64],
    plane: usize,
    d_out: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check(x.len(), slopes.len(), plane, "prelu_backward")?;
    if d_out.len() != x.len() {
        return Err(Error::shape(
            "prelu_backward",
            format!("upstream gradient length {} vs input {}", d_out.len(), x.len()),
        ));
    }
    let mut d_x = vec![0.0; x.len()];
    let mut d_slopes = vec![0.0; slopes.len()];
    for (i, (&v, &g)) in x.iter().zip(d_out).enumerate() {
        let c = i / plane;
        if v >= 0.0 {
            d_x[i] = g;
        } else {
            d_x[i] = slopes[c] * g;
            d_slopes[c] += g * v;
        }
    }
    Ok((d_x, d_slopes))
}
