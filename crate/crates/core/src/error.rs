use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {x} lies outside [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },

    #[error("space is only C^{continuity}; second derivatives need at least C^1")]
    InsufficientContinuity { continuity: i64 },

    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },

    #[error("singular pivot at row {index}")]
    SingularPivot { index: usize },

    #[error("size {size} exceeds the dense cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("conjugate gradient breakdown at iteration {iteration}: p*Ap = {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, Error>;
