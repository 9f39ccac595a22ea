//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameter validation failed (sizes, ranges, membership).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Exhaustive enumeration requested beyond the supported system size.
    #[error("system size n={n} exceeds enumeration cap {max}")]
    TooLarge { n: usize, max: usize },

    /// Fixed-point iteration failed to reach the residual tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// An operation was invoked outside the temperature regime it is defined for.
    #[error("regime mismatch: expected {expected}, found {found}")]
    RegimeMismatch { expected: String, found: String },

    /// A quantity is undefined because the field law is degenerate.
    #[error("degenerate field: {0}")]
    DegenerateField(String),

    /// A linear system required by a variance formula is singular.
    #[error("singular system: condition {0} failed")]
    SingularSystem(String),

    /// Numerical evaluation outside the stable range of a quadrature scheme.
    #[error("quadrature unstable: {0}")]
    QuadratureUnstable(String),

    /// Integer overflow in a combinatorial quantity.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
