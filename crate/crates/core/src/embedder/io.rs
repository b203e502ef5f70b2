//! Binary model file: little-endian, magic "JEMB", version, k, a layer-shape
//! table (so the channel plan is auditable from the file alone), then raw
//! 64-bit parameter blocks in declared order. Round-trips are bit-exact.

use super::{ClassifierHead, ModelParams, FC1_WIDTH, FC2_WIDTH, FLAT_LEN};
use super::{CONV1_CHANNELS, CONV2_CHANNELS, KERNEL_SIDE};
use crate::error::{Error, ModelFileError, Result};
use crate::kernels::Tensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MODEL_MAGIC: &[u8; 4] = b"JEMB";
pub const MODEL_VERSION: u32 = 1;

/// Declared block shapes for a model with embedding dim `k`, and for the
/// optional head with `n_classes` outputs.
fn expected_shapes(k: usize, head_classes: Option<usize>) -> Vec<Vec<usize>> {
    let mut shapes = vec![
        vec![CONV1_CHANNELS, 1, KERNEL_SIDE, KERNEL_SIDE],
        vec![CONV1_CHANNELS],
        vec![CONV1_CHANNELS],
        vec![CONV2_CHANNELS, CONV1_CHANNELS, KERNEL_SIDE, KERNEL_SIDE],
        vec![CONV2_CHANNELS],
        vec![CONV2_CHANNELS],
        vec![FC1_WIDTH, FLAT_LEN],
        vec![FC1_WIDTH],
        vec![FC1_WIDTH],
        vec![FC2_WIDTH, FC1_WIDTH],
        vec![FC2_WIDTH],
        vec![FC2_WIDTH],
        vec![k, FC2_WIDTH],
        vec![k],
    ];
    if let Some(classes) = head_classes {
        shapes.push(vec![k]);
        shapes.push(vec![classes, k]);
        shapes.push(vec![classes]);
    }
    shapes
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::ModelFile(ModelFileError::Truncated)
            } else {
                Error::io("<model stream>", e)
            }
        })
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn f64_block(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; n * 8];
        self.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_block<W: Write>(w: &mut W, data: &[f64]) -> std::io::Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes the model (and head, when given) to `path`.
pub fn save_model(params: &ModelParams, head: Option<&ClassifierHead>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    w.write_all(MODEL_MAGIC).map_err(io_err)?;
    w.write_all(&MODEL_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(params.embedding_dim as u32).to_le_bytes())
        .map_err(io_err)?;
    match head {
        Some(h) => {
            w.write_all(&[1u8]).map_err(io_err)?;
            w.write_all(&(h.n_classes() as u32).to_le_bytes())
                .map_err(io_err)?;
        }
        None => w.write_all(&[0u8]).map_err(io_err)?,
    }

    let shapes = expected_shapes(params.embedding_dim, head.map(|h| h.n_classes()));
    w.write_all(&(shapes.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for shape in &shapes {
        w.write_all(&(shape.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
        }
    }

    for block in params.blocks() {
        write_block(&mut w, block).map_err(io_err)?;
    }
    if let Some(h) = head {
        for block in h.blocks() {
            write_block(&mut w, block).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads a model saved by [`save_model`]. Corruption, version bumps and
/// truncation each surface as their own error kind.
pub fn load_model(path: &Path) -> Result<(ModelParams, Option<ClassifierHead>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic.into());
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(ModelFileError::Version {
            found: version,
            expected: MODEL_VERSION,
        }
        .into());
    }
    let k = r.u32()? as usize;
    let head_classes = match r.u8()? {
        0 => None,
        _ => Some(r.u32()? as usize),
    };

    let n_blocks = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let ndim = r.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        shapes.push(dims);
    }
    let expected = expected_shapes(k, head_classes);
    if shapes != expected {
        return Err(ModelFileError::ShapeTable(format!(
            "found {shapes:?}, expected {expected:?}"
        ))
        .into());
    }

    let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(shapes.len());
    for shape in &shapes {
        let n: usize = shape.iter().product();
        blocks.push(r.f64_block(n)?);
    }

    let mut it = blocks.into_iter();
    let mut next = || it.next().expect("block count checked above");
    let params = ModelParams {
        conv1: super::ConvBlock {
            weights: Tensor::from_vec(&expected[0], next())?,
            bias: next(),
            slopes: next(),
        },
        conv2: super::ConvBlock {
            weights: Tensor::from_vec(&expected[3], next())?,
            bias: next(),
            slopes: next(),
        },
        fc1: super::LinearBlock {
            weights: Tensor::from_vec(&expected[6], next())?,
            bias: next(),
            slopes: next(),
        },
        fc2: super::LinearBlock {
            weights: Tensor::from_vec(&expected[9], next())?,
            bias: next(),
            slopes: next(),
        },
        fc3: super::LinearBlock {
            weights: Tensor::from_vec(&expected[12], next())?,
            bias: next(),
            slopes: vec![],
        },
        embedding_dim: k,
    };
    let head = head_classes.map(|classes| ClassifierHead {
        slopes: next(),
        weights: Tensor::from_vec(&[classes, k], next()).expect("shape checked"),
        bias: next(),
    });
    Ok((params, head))
}
