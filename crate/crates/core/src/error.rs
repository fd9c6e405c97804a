use std::io;

use thiserror::Error;

/// Errors produced anywhere in the decoding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown movement label `{0}`")]
    UnknownMovement(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Whether this error stems from a numerical failure (singular fit,
    /// non-invertible covariance) rather than bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular(_) | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
