//! Error types shared across the crate.

use std::path::PathBuf;

/// Errors specific to the binary model file format.
#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("bad magic bytes, not a model file")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model file truncated")]
    Truncated,
    #[error("shape table does not match the declared architecture: {0}")]
    ShapeTable(String),
}

/// Errors specific to the binary reference-pattern file format.
#[derive(Debug, thiserror::Error)]
pub enum PatternFileError {
    #[error("bad magic bytes, not a reference-pattern file")]
    BadMagic,
    #[error("unsupported reference-pattern version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("reference-pattern file truncated")]
    Truncated,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("model file error: {0}")]
    ModelFile(#[from] ModelFileError),

    #[error("reference-pattern file error: {0}")]
    PatternFile(#[from] PatternFileError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
