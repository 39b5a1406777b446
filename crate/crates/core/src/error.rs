use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("sample too small: {got} values, need at least {need}")]
    SampleSize { got: usize, need: usize },

    #[error("table integrity error: {0}")]
    Integrity(String),

    #[error("table shape error: {0}")]
    Shape(String),

    #[error("unsupported table format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("table checksum mismatch: header says {stored:08x}, contents hash to {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("table file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
