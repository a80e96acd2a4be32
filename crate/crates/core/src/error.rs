use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the model stack.
#[derive(Error, Debug)]
pub enum Error {
    /// Operand shapes are incompatible for an operation.
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A single operand has the wrong shape.
    #[error("{op}: bad shape {shape:?}: {reason}")]
    BadShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },

    /// Invalid configuration value (stride/padding/beta range and friends).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an API precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Bad user-supplied input (empty corpus, missing caption, overlong sequence).
    #[error("input error: {0}")]
    Input(String),

    /// NaN or Inf surfaced in a computation.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Corrupt or incompatible serialized container.
    #[error("integrity error in {path}: {reason}")]
    Integrity { path: PathBuf, reason: String },

    #[error("image error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn integrity(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Integrity {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
