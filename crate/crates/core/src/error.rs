use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate symbol: min |p| on the unit kappa-sphere is {lambda:e} at {argmin:?}")]
    Degenerate { lambda: f64, argmin: Vec<f64> },

    #[error("multiplier is singular at lattice frequency {frequency:?}")]
    Singular { frequency: Vec<f64> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("neumann iteration diverged: {reason}")]
    Divergence { reason: String, factors: Vec<f64> },

    #[error("{what} = {value:e} exceeds the tolerance {limit:e}")]
    Tolerance { what: String, value: f64, limit: f64 },

    #[error("grid format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
