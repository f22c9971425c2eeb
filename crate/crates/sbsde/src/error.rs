use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The boundary regime does not satisfy the hypothesis of the construction.
    #[error("regime error: {0}")]
    Regime(String),

    /// Newton iteration failed at a time step.
    #[error("solver did not converge at time index {step} after {iters} iterations (residual {residual:e})")]
    Solver { step: usize, iters: usize, residual: f64 },

    /// Query outside the stored field.
    #[error("interpolation outside the field domain at x={x}, t={t}")]
    Interpolation { x: f64, t: f64 },

    /// Index arguments out of range.
    #[error("index error: {0}")]
    Index(String),

    /// Malformed serialized data.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
