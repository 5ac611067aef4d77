use alloc::string::String;

/// Errors raised by the reconstruction toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dense materialization of {rows}x{cols} exceeds the cap of {cap} entries")]
    DenseCapExceeded { rows: usize, cols: usize, cap: usize },

    #[error("inner solver did not reach tolerance after {iterations} iterations (relative residual {residual:e})")]
    InnerSolverFailed { iterations: usize, residual: f64 },

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("denominator is zero in {0}")]
    ZeroDenominator(&'static str),

    #[error("sinogram bin {index} is negative ({value:e}) beyond clamp tolerance")]
    NegativeData { index: usize, value: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
