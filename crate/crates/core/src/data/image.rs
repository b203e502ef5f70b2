//! Image loading: binary PGM (P5) and PNG readers, bilinear resizing to the
//! canonical 48x48 [0,1] grayscale tensor.

use super::{ImageSample, Manifest};
use crate::embedder::INPUT_SIDE;
use crate::error::{Error, Result};
use crate::kernels::Tensor;
use std::io::Read;
use std::path::Path;

/// 8-bit grayscale image buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Writes a binary P5 PGM with maxval 255. The layout is fixed, so equal
/// pixel content means byte-identical files.
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    bytes.extend_from_slice(&img.pixels);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn pgm_token<'a>(data: &'a [u8], pos: &mut usize, path: &Path) -> Result<&'a [u8]> {
    // skip whitespace and '#' comment lines
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Data(format!("{}: truncated PGM header", path.display())));
    }
    Ok(&data[start..*pos])
}

fn pgm_number(data: &[u8], pos: &mut usize, path: &Path) -> Result<usize> {
    let tok = pgm_token(data, pos, path)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("{}: bad PGM header field", path.display())))
}

/// Reads a binary P5 PGM with maxval 255.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    if pgm_token(&data, &mut pos, path)? != b"P5" {
        return Err(Error::Data(format!("{}: not a binary PGM (P5)", path.display())));
    }
    let width = pgm_number(&data, &mut pos, path)?;
    let height = pgm_number(&data, &mut pos, path)?;
    let maxval = pgm_number(&data, &mut pos, path)?;
    if maxval != 255 {
        return Err(Error::Data(format!(
            "{}: unsupported PGM maxval {maxval}",
            path.display()
        )));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height;
    if data.len() < pos + need {
        return Err(Error::Data(format!("{}: truncated PGM pixel data", path.display())));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: data[pos..pos + need].to_vec(),
    })
}

fn read_png(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .to_luma8();
    Ok(GrayImage {
        width: img.width() as usize,
        height: img.height() as usize,
        pixels: img.into_raw(),
    })
}

/// Reads a PGM or PNG image as 8-bit grayscale.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") => read_pgm(path),
        Some(ext) if ext.eq_ignore_ascii_case("png") => read_png(path),
        _ => Err(Error::Data(format!(
            "{}: unsupported image extension (need .pgm or .png)",
            path.display()
        ))),
    }
}

/// Bilinear resize on f64 pixel values, center-aligned sampling.
pub fn bilinear_resize(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    if sw == dw && sh == dh {
        return src.to_vec();
    }
    let mut out = vec![0.0; dw * dh];
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    for dy in 0..dh {
        let fy = ((dy as f64 + 0.5) * sy - 0.5).clamp(0.0, sh as f64 - 1.0);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f64;
        for dx in 0..dw {
            let fx = ((dx as f64 + 0.5) * sx - 0.5).clamp(0.0, sw as f64 - 1.0);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - wx) + src[y0 * sw + x1] * wx;
            let bot = src[y1 * sw + x0] * (1.0 - wx) + src[y1 * sw + x1] * wx;
            out[dy * dw + dx] = top * (1.0 - wy) + bot * wy;
        }
    }
    out
}

/// Loads one sample, bilinearly resizes to 48x48, divides by 255.
pub fn load_and_resize(manifest: &Manifest, sample: &ImageSample) -> Result<Tensor> {
    let path = manifest.resolve(sample);
    let img = read_gray(&path)?;
    if img.width == 0 || img.height == 0 {
        return Err(Error::Data(format!("{}: empty image", path.display())));
    }
    let f: Vec<f64> = img.pixels.iter().map(|&p| p as f64).collect();
    let resized = bilinear_resize(&f, img.width, img.height, INPUT_SIDE, INPUT_SIDE);
    Tensor::from_vec(
        &[1, INPUT_SIDE, INPUT_SIDE],
        resized.into_iter().map(|v| v / 255.0).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let img = GrayImage {
            width: 3,
            height: 2,
            pixels: vec![0, 128, 255, 1, 2, 3],
        };
        write_pgm(&path, &img).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
    }

    #[test]
    fn already_sized_constant_image_becomes_ones() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.pgm");
        write_pgm(
            &path,
            &GrayImage {
                width: 48,
                height: 48,
                pixels: vec![255; 48 * 48],
            },
        )
        .unwrap();
        let manifest = Manifest {
            samples: vec![],
            base_dir: dir.path().to_path_buf(),
        };
        let sample = ImageSample {
            path: "white.pgm".into(),
            subject_id: "s".into(),
            sensor_id: "c".into(),
            split: None,
        };
        let t = load_and_resize(&manifest, &sample).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn checkerboard_downsample_preserves_mean() {
        let mut pixels = vec![0u8; 96 * 96];
        for y in 0..96 {
            for x in 0..96 {
                pixels[y * 96 + x] = if (x + y) % 2 == 0 { 0 } else { 255 };
            }
        }
        let f: Vec<f64> = pixels.iter().map(|&p| p as f64).collect();
        let out = bilinear_resize(&f, 96, 96, 48, 48);
        let src_mean = f.iter().sum::<f64>() / f.len() as f64;
        let dst_mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!((src_mean - dst_mean).abs() < 1e-3 * 255.0, "{src_mean} vs {dst_mean}");
    }

    /// Independent bilinear oracle: evaluates the interpolation weights
    /// from the triangle kernel directly at one destination pixel.
    fn bilinear_oracle_at(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize, dx: usize, dy: usize) -> f64 {
        let fx = ((dx as f64 + 0.5) * sw as f64 / dw as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
        let fy = ((dy as f64 + 0.5) * sh as f64 / dh as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
        let mut acc = 0.0;
        for y in 0..sh {
            for x in 0..sw {
                let wx = (1.0 - (fx - x as f64).abs()).max(0.0);
                let wy = (1.0 - (fy - y as f64).abs()).max(0.0);
                acc += src[y * sw + x] * wx * wy;
            }
        }
        acc
    }

    #[test]
    fn delta_image_matches_bilinear_oracle() {
        let (sw, sh) = (7, 5);
        let mut src = vec![0.0; sw * sh];
        src[2 * sw + 3] = 1.0;
        let (dw, dh) = (48, 48);
        let out = bilinear_resize(&src, sw, sh, dw, dh);
        for dy in (0..dh).step_by(5) {
            for dx in (0..dw).step_by(5) {
                let want = bilinear_oracle_at(&src, sw, sh, dw, dh, dx, dy);
                let got = out[dy * dw + dx];
                assert!((want - got).abs() < 1e-12, "({dx},{dy}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn unreadable_file_error_carries_path() {
        let manifest = Manifest::new(vec![]);
        let sample = ImageSample {
            path: "/nonexistent/x.pgm".into(),
            subject_id: "s".into(),
            sensor_id: "c".into(),
            split: None,
        };
        let err = load_and_resize(&manifest, &sample).unwrap_err();
        assert!(err.to_string().contains("x.pgm"), "{err}");
    }
}
