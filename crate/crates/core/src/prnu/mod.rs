//! Sensor identification baseline: noise-residual extraction, per-sensor
//! reference patterns, residual enhancement, and NCC-based assignment.
//!
//! Residuals are `W = I - F(I)` with `F` a 3x3 Gaussian blur (sigma 0.8,
//! reflected borders). The denoiser sits behind [`Denoiser`] so a different
//! filter can slot in without touching the pipeline.

pub mod store;

use crate::error::{Error, Result};
use crate::kernels::Tensor;

/// Pluggable denoising filter used for residual extraction.
pub trait Denoiser {
    fn denoise(&self, image: &[f64], rows: usize, cols: usize) -> Vec<f64>;
}

/// Separable Gaussian blur, 3x3 (radius 1), reflected borders.
#[derive(Debug, Clone, Copy)]
pub struct GaussianDenoiser {
    pub sigma: f64,
}

impl Default for GaussianDenoiser {
    fn default() -> Self {
        GaussianDenoiser { sigma: 0.8 }
    }
}

impl Denoiser for GaussianDenoiser {
    fn denoise(&self, image: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let w1 = (-1.0 / (2.0 * self.sigma * self.sigma)).exp();
        let norm = 1.0 + 2.0 * w1;
        let kernel = [w1 / norm, 1.0 / norm, w1 / norm];
        let reflect = |i: isize, n: usize| -> usize {
            if i < 0 {
                (-i - 1) as usize
            } else if i as usize >= n {
                2 * n - 1 - i as usize
            } else {
                i as usize
            }
        };
        let mut tmp = vec![0.0; rows * cols];
        for y in 0..rows {
            for x in 0..cols {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = reflect(x as isize + ki as isize - 1, cols);
                    acc += k * image[y * cols + sx];
                }
                tmp[y * cols + x] = acc;
            }
        }
        let mut out = vec![0.0; rows * cols];
        for y in 0..rows {
            for x in 0..cols {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sy = reflect(y as isize + ki as isize - 1, rows);
                    acc += k * tmp[sy * cols + x];
                }
                out[y * cols + x] = acc;
            }
        }
        out
    }
}

/// Residual-enhancement attenuation scale, in units of the residual's own
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceConfig {
    pub alpha: f64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig { alpha: 6.0 }
    }
}

/// Per-sensor PRNU estimate aggregated from training images.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePattern {
    pub sensor_id: String,
    pub pattern: Tensor,
    pub n_images: usize,
}

fn check_image(image: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    let s = image.shape();
    let (rows, cols) = match s.len() {
        2 => (s[0], s[1]),
        3 if s[0] == 1 => (s[1], s[2]),
        _ => {
            return Err(Error::shape(
                op,
                format!("expected a single-channel image, got {s:?}"),
            ))
        }
    };
    if rows.min(cols) < 16 {
        return Err(Error::shape(
            op,
            format!("image {rows}x{cols} below the 16-pixel minimum"),
        ));
    }
    Ok((rows, cols))
}

/// `W = I - F(I)` using the default Gaussian denoiser.
pub fn noise_residual(image: &Tensor) -> Result<Tensor> {
    noise_residual_with(image, &GaussianDenoiser::default())
}

/// `W = I - F(I)` with an explicit denoiser.
pub fn noise_residual_with(image: &Tensor, denoiser: &dyn Denoiser) -> Result<Tensor> {
    let (rows, cols) = check_image(image, "noise_residual")?;
    let smooth = denoiser.denoise(image.data(), rows, cols);
    let data: Vec<f64> = image
        .data()
        .iter()
        .zip(&smooth)
        .map(|(i, f)| i - f)
        .collect();
    Tensor::from_vec(&[rows, cols], data)
}

/// Smoothly attenuates large residual coefficients:
/// `x -> x * exp(-x^2 / (2 * (alpha*sigma)^2))` with `sigma` the residual's
/// own standard deviation. Strong scene-driven components shrink while the
/// small PRNU-scale ones pass. A zero-variance residual returns unchanged.
pub fn enhance_model3(residual: &Tensor, cfg: EnhanceConfig) -> Tensor {
    let n = residual.len() as f64;
    let mean = residual.data().iter().sum::<f64>() / n;
    let var = residual
        .data()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    if var == 0.0 {
        return residual.clone();
    }
    let scale = 2.0 * cfg.alpha * cfg.alpha * var;
    let data: Vec<f64> = residual
        .data()
        .iter()
        .map(|&x| x * (-(x * x) / scale).exp())
        .collect();
    Tensor::from_vec(residual.shape(), data).expect("same shape")
}

/// Maximum-likelihood reference estimate from residual/image pairs:
/// `K = sum(W_i * I_i) / sum(I_i^2)` elementwise, then zero-meaned.
pub fn build_reference(
    pairs: &[(&Tensor, &Tensor)],
    sensor_id: &str,
) -> Result<ReferencePattern> {
    if pairs.len() < 2 {
        return Err(Error::Data(format!(
            "sensor {sensor_id}: need at least 2 training images, got {}",
            pairs.len()
        )));
    }
    let shape = pairs[0].0.shape().to_vec();
    let n = pairs[0].0.len();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for (residual, image) in pairs {
        if residual.shape() != shape || image.len() != n {
            return Err(Error::shape(
                "build_reference",
                format!(
                    "inconsistent dimensions: {:?} vs {:?}",
                    residual.shape(),
                    shape
                ),
            ));
        }
        for i in 0..n {
            num[i] += residual.data()[i] * image.data()[i];
            den[i] += image.data()[i] * image.data()[i];
        }
    }
    let mut k: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(a, b)| if *b > 1e-12 { a / b } else { 0.0 })
        .collect();
    let mean = k.iter().sum::<f64>() / n as f64;
    for v in k.iter_mut() {
        *v -= mean;
    }
    Ok(ReferencePattern {
        sensor_id: sensor_id.to_string(),
        pattern: Tensor::from_vec(&shape, k)?,
        n_images: pairs.len(),
    })
}

/// Zero-shift normalized cross-correlation of two equally sized matrices.
pub fn ncc(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "ncc",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    ncc_slices(a.data(), b.data())
}

/// NCC over raw slices of equal length.
pub fn ncc_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(
            "ncc",
            format!("lengths {} vs {}", a.len(), b.len()),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Data("ncc: zero-variance input".into()));
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

/// Scores of one test image against every reference pattern, in gallery order.
#[derive(Debug, Clone)]
pub struct SensorAssignment {
    pub sensor_id: String,
    pub scores: Vec<f64>,
}

/// Assigns a test image to the gallery sensor whose reference pattern
/// correlates best with the enhanced test residual. Ties break toward the
/// lowest sensor_id, so the result is gallery-order invariant.
pub fn identify_sensor(
    image: &Tensor,
    gallery: &[ReferencePattern],
    cfg: EnhanceConfig,
) -> Result<SensorAssignment> {
    if gallery.is_empty() {
        return Err(Error::Data("identify_sensor: empty gallery".into()));
    }
    let residual = enhance_model3(&noise_residual(image)?, cfg);
    let mut scores = Vec::with_capacity(gallery.len());
    for reference in gallery {
        scores.push(ncc(&residual, &reference.pattern)?);
    }
    let mut best = 0;
    for i in 1..gallery.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && gallery[i].sensor_id < gallery[best].sensor_id);
        if better {
            best = i;
        }
    }
    Ok(SensorAssignment {
        sensor_id: gallery[best].sensor_id.clone(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_image(seed: u64, side: usize) -> Tensor {
        let mut r = rng::stream(seed);
        Tensor::from_fn(&[side, side], |_| {
            (0.5 + 0.15 * rng::next_gaussian(&mut r)).clamp(0.0, 1.0)
        })
    }

    #[test]
    fn constant_image_has_zero_residual() {
        let img = Tensor::from_vec(&[32, 32], vec![0.42; 1024]).unwrap();
        let w = noise_residual(&img).unwrap();
        assert!(w.data().iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn residual_correlates_with_injected_noise() {
        let side = 48;
        let smooth = random_image(5, side);
        let blurred = GaussianDenoiser { sigma: 3.0 }.denoise(smooth.data(), side, side);
        let mut r = rng::stream(6);
        let mut noise = vec![0.0; side * side];
        rng::fill_gaussian(&mut r, &mut noise);
        for v in noise.iter_mut() {
            *v *= 0.02;
        }
        let img = Tensor::from_vec(
            &[side, side],
            blurred.iter().zip(&noise).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let w = noise_residual(&img).unwrap();
        let corr = ncc_slices(w.data(), &noise).unwrap();
        assert!(corr > 0.5, "corr {corr}");
    }

    #[test]
    fn residual_negates_with_the_image() {
        let img = random_image(7, 32);
        let inv = Tensor::from_vec(&[32, 32], img.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        let w1 = noise_residual(&img).unwrap();
        let w2 = noise_residual(&inv).unwrap();
        for (a, b) in w1.data().iter().zip(w2.data()) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_image_rejected() {
        let img = Tensor::zeros(&[8, 8]);
        assert!(noise_residual(&img).is_err());
    }

    #[test]
    fn enhancement_fixes_zero_and_small_values() {
        let mut r = rng::stream(88);
        let mut data = vec![0.0; 400];
        rng::fill_gaussian(&mut r, &mut data);
        data[0] = 0.0;
        let residual = Tensor::from_vec(&[20, 20], data).unwrap();
        let out = enhance_model3(&residual, EnhanceConfig::default());
        assert_eq!(out.data()[0], 0.0);
        // alpha*sigma ~= 6 here, so |x| <= 0.1 must pass almost unchanged
        let mut checked = 0;
        for (a, b) in residual.data().iter().zip(out.data()).skip(1) {
            if a.abs() > 1e-3 && a.abs() <= 0.1 {
                assert!((a - b).abs() / a.abs() < 2e-4, "{a} -> {b}");
                checked += 1;
            }
        }
        assert!(checked > 5);
    }

    #[test]
    fn enhancement_is_odd_and_bounded() {
        let mut r = rng::stream(8);
        let mut data = vec![0.0; 1024];
        rng::fill_gaussian(&mut r, &mut data);
        let residual = Tensor::from_vec(&[32, 32], data.clone()).unwrap();
        let neg = Tensor::from_vec(&[32, 32], data.iter().map(|v| -v).collect()).unwrap();
        let cfg = EnhanceConfig { alpha: 2.0 };
        let out = enhance_model3(&residual, cfg);
        let out_neg = enhance_model3(&neg, cfg);
        let n = residual.len() as f64;
        let mean = residual.data().iter().sum::<f64>() / n;
        let sigma = (residual
            .data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n)
            .sqrt();
        let bound = cfg.alpha * sigma * (-0.5f64).exp();
        for (a, b) in out.data().iter().zip(out_neg.data()) {
            assert!((a + b).abs() < 1e-12, "odd symmetry");
            assert!(a.abs() <= bound + 1e-12, "bound: |{a}| vs {bound}");
        }
    }

    #[test]
    fn enhancement_recovers_spiked_residual() {
        // a residual carrying the true pattern plus one huge scene edge should
        // match the pattern better after enhancement
        let side = 48;
        let mut r = rng::stream(9);
        let mut truth = vec![0.0; side * side];
        rng::fill_gaussian(&mut r, &mut truth);
        for v in truth.iter_mut() {
            *v *= 0.01;
        }
        let mut spiked = truth.clone();
        for x in 0..side {
            spiked[20 * side + x] += 1.5; // scene edge
        }
        let spiked = Tensor::from_vec(&[side, side], spiked).unwrap();
        let truth_t = Tensor::from_vec(&[side, side], truth).unwrap();
        let plain = ncc(&spiked, &truth_t).unwrap();
        let enhanced = ncc(
            &enhance_model3(&spiked, EnhanceConfig { alpha: 2.0 }),
            &truth_t,
        )
        .unwrap();
        assert!(enhanced > plain, "enhanced {enhanced} vs plain {plain}");
    }

    #[test]
    fn reference_from_identical_images_is_proportional_to_residual() {
        // near-constant intensity so the I-weighting in sum(W*I)/sum(I^2)
        // reduces to a scalar factor
        let mut r = rng::stream(10);
        let img = Tensor::from_fn(&[32, 32], |_| 0.5 + 0.01 * rng::next_gaussian(&mut r));
        let w = noise_residual(&img).unwrap();
        let reference = build_reference(&[(&w, &img), (&w, &img)], "cam").unwrap();
        let corr = ncc(&reference.pattern, &w).unwrap();
        assert!(corr > 0.999, "corr {corr}");
        let mean: f64 = reference.pattern.data().iter().sum::<f64>()
            / reference.pattern.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn reference_needs_two_images() {
        let img = random_image(11, 32);
        let w = noise_residual(&img).unwrap();
        assert!(build_reference(&[(&w, &img)], "cam").is_err());
    }

    #[test]
    fn more_training_images_improve_the_reference() {
        let side = 48;
        let cfg = crate::data::synth::SynthConfig {
            n_subjects: 1,
            n_sensors: 1,
            images_per_class: 10,
            ..Default::default()
        };
        let truth = crate::data::synth::sensor_field(&cfg, 0);
        let base = crate::data::synth::subject_field(&cfg, 0);
        let images: Vec<Tensor> = (0..10)
            .map(|i| {
                let g = crate::data::synth::render_image(&cfg, &base, &truth, 0, 0, i);
                Tensor::from_vec(
                    &[side, side],
                    g.pixels.iter().map(|&p| p as f64 / 255.0).collect(),
                )
                .unwrap()
            })
            .collect();
        let residuals: Vec<Tensor> = images.iter().map(|i| noise_residual(i).unwrap()).collect();
        let truth_t = Tensor::from_vec(&[side, side], truth).unwrap();

        let few: Vec<(&Tensor, &Tensor)> =
            residuals.iter().zip(&images).take(2).map(|(w, i)| (w, i)).collect();
        let many: Vec<(&Tensor, &Tensor)> =
            residuals.iter().zip(&images).map(|(w, i)| (w, i)).collect();
        let r_few = ncc(&build_reference(&few, "cam").unwrap().pattern, &truth_t).unwrap();
        let r_many = ncc(&build_reference(&many, "cam").unwrap().pattern, &truth_t).unwrap();
        assert!(r_many > r_few, "10 images {r_many} vs 2 images {r_few}");
    }

    #[test]
    fn ncc_basic_identities() {
        let a = random_image(12, 24);
        assert!((ncc(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg = Tensor::from_vec(&[24, 24], a.data().iter().map(|v| -v).collect()).unwrap();
        assert!((ncc(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ncc_of_independent_noise_is_small() {
        let side = 48;
        for seed in 0..5 {
            let mut r1 = rng::stream(100 + seed);
            let mut r2 = rng::stream(200 + seed);
            let mut a = vec![0.0; side * side];
            let mut b = vec![0.0; side * side];
            rng::fill_gaussian(&mut r1, &mut a);
            rng::fill_gaussian(&mut r2, &mut b);
            let r = ncc_slices(&a, &b).unwrap();
            assert!(r.abs() < 5.0 / (side as f64), "|{r}| too large");
        }
    }

    #[test]
    fn ncc_rejects_zero_variance() {
        let a = Tensor::from_vec(&[4, 4], vec![1.0; 16]).unwrap();
        let b = random_image(13, 4);
        // 4x4 passes shape checks for ncc (no 16px minimum there)
        assert!(ncc(&a, &b).is_err());
    }

    #[test]
    fn single_sensor_gallery_always_wins() {
        let img = random_image(14, 32);
        let w = noise_residual(&img).unwrap();
        let reference = build_reference(&[(&w, &img), (&w, &img)], "only").unwrap();
        let a = identify_sensor(&img, &[reference], EnhanceConfig::default()).unwrap();
        assert_eq!(a.sensor_id, "only");
        assert_eq!(a.scores.len(), 1);
    }

    #[test]
    fn assignment_is_argmax_consistent_and_order_invariant() {
        let cfg = crate::data::synth::SynthConfig {
            n_subjects: 2,
            n_sensors: 3,
            images_per_class: 4,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let m = crate::data::synth::generate_synthetic(&cfg, dir.path()).unwrap();
        let mut by_sensor: std::collections::BTreeMap<String, Vec<Tensor>> = Default::default();
        for s in &m.samples {
            let t = crate::data::image::load_and_resize(&m, s).unwrap();
            let t2 = t.reshaped(&[48, 48]).unwrap();
            by_sensor.entry(s.sensor_id.clone()).or_default().push(t2);
        }
        let gallery: Vec<ReferencePattern> = by_sensor
            .iter()
            .map(|(id, images)| {
                let residuals: Vec<Tensor> = images
                    .iter()
                    .map(|i| {
                        enhance_model3(&noise_residual(i).unwrap(), EnhanceConfig::default())
                    })
                    .collect();
                let pairs: Vec<(&Tensor, &Tensor)> =
                    residuals.iter().zip(images.iter()).collect();
                build_reference(&pairs, id).unwrap()
            })
            .collect();
        let probe = &by_sensor["c01"][0];
        let a = identify_sensor(probe, &gallery, EnhanceConfig::default()).unwrap();
        let argmax = a
            .scores
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(gallery[argmax].sensor_id, a.sensor_id);

        let mut reversed = gallery.clone();
        reversed.reverse();
        let b = identify_sensor(probe, &reversed, EnhanceConfig::default()).unwrap();
        assert_eq!(a.sensor_id, b.sensor_id);
    }
}
