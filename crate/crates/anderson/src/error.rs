//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("operands use different shard layouts")]
    LayoutMismatch,

    #[error("shard layout must satisfy 1 <= shards <= length (got {shards} shards for length {len})")]
    BadLayout { shards: usize, len: usize },

    #[error("empty reduction request (need at least one column)")]
    EmptyReduction,

    #[error("coefficient count {coeffs} does not match column count {cols}")]
    CoefficientMismatch { coeffs: usize, cols: usize },

    #[error("orthogonalization breakdown: column is numerically dependent on the window ({detail})")]
    Breakdown { detail: String },

    #[error("window capacity {capacity} exhausted")]
    WindowFull { capacity: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("operator is not positive definite (p^T A p = {0:e})")]
    IndefiniteOperator(f64),

    #[error("zero diagonal entry at index {0}")]
    ZeroDiagonal(usize),

    #[error("inner linear solve did not converge: relative residual {rel_residual:e} after {iterations} iterations")]
    InnerSolve {
        iterations: usize,
        rel_residual: f64,
    },

    #[error("iterate diverged: {0}")]
    Diverged(String),

    #[error("degenerate mixture: density underflowed to zero at sample {0}")]
    DegenerateMixture(usize),

    #[error("repeated orthogonalization breakdown after window restart")]
    RepeatedBreakdown,

    #[error("test matrix request invalid: {0}")]
    BadTestMatrix(String),
}

pub type Result<T> = std::result::Result<T, Error>;
