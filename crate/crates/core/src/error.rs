use thiserror::Error;

/// Errors raised by the simulation and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "covariance factorization failed on a grid of {cells} cells \
         (max jitter {jitter:e}, condition estimate {condition:e})"
    )]
    Factorization {
        cells: usize,
        jitter: f64,
        condition: f64,
    },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical routines, as opposed to bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Factorization { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
