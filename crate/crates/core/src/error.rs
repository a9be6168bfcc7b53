use thiserror::Error;

/// Errors raised by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid mismatch between densities")]
    GridMismatch,
    #[error("degenerate message: density has no positive mass")]
    DegenerateMessage,
    #[error("density is not normalized (total mass {0})")]
    NotNormalized(f64),
    #[error("support set is empty")]
    EmptySupport,
    #[error("signal has zero energy")]
    ZeroSignal,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
