use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient history for embedding: series length {len}, need at least {min}")]
    InsufficientHistory { len: usize, min: usize },

    /// Input file does not match the declared schema (bad header, missing column, ...).
    #[error("schema error in {path}: {detail}")]
    Schema { path: PathBuf, detail: String },

    /// Input is structurally valid but degenerate for the requested operation
    /// (all documents empty, single-class labels, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
