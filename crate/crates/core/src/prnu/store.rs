//! Reference-pattern gallery on disk: one binary file per sensor, named
//! `<sensor_id>.prnu`, holding {magic "PRNU", version, rows, cols, count,
//! 64-bit matrix}.

use super::ReferencePattern;
use crate::error::{Error, PatternFileError, Result};
use crate::kernels::Tensor;
use std::io::Read;
use std::path::Path;

pub const PATTERN_MAGIC: &[u8; 4] = b"PRNU";
pub const PATTERN_VERSION: u32 = 1;

pub fn save_pattern(pattern: &ReferencePattern, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.prnu", pattern.sensor_id));
    let shape = pattern.pattern.shape();
    let mut bytes = Vec::with_capacity(20 + pattern.pattern.len() * 8);
    bytes.extend_from_slice(PATTERN_MAGIC);
    bytes.extend_from_slice(&PATTERN_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(shape[0] as u32).to_le_bytes());
    bytes.extend_from_slice(&(shape[1] as u32).to_le_bytes());
    bytes.extend_from_slice(&(pattern.n_images as u32).to_le_bytes());
    for v in pattern.pattern.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_pattern(path: &Path) -> Result<ReferencePattern> {
    let sensor_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Data(format!("{}: no sensor id in filename", path.display())))?
        .to_string();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 20];
    file.read_exact(&mut header).map_err(|e| truncation(path, e))?;
    if &header[0..4] != PATTERN_MAGIC {
        return Err(PatternFileError::BadMagic.into());
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != PATTERN_VERSION {
        return Err(PatternFileError::Version {
            found: version,
            expected: PATTERN_VERSION,
        }
        .into());
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let n_images = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    let mut data = vec![0u8; rows * cols * 8];
    file.read_exact(&mut data).map_err(|e| truncation(path, e))?;
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ReferencePattern {
        sensor_id,
        pattern: Tensor::from_vec(&[rows, cols], values)?,
        n_images,
    })
}

fn truncation(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        PatternFileError::Truncated.into()
    } else {
        Error::io(path, e)
    }
}

/// Loads every `*.prnu` file in a gallery directory, sorted by sensor id.
pub fn load_gallery(dir: &Path) -> Result<Vec<ReferencePattern>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<std::path::PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("prnu"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "{}: no .prnu reference patterns found",
            dir.display()
        )));
    }
    paths.iter().map(|p| load_pattern(p)).collect()
}
