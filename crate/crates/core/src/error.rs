use thiserror::Error;

/// Errors raised by the numerical routines and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid stochastic matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("target distribution entry {index} is {value}, must be strictly positive")]
    NonPositiveTarget { index: usize, value: f64 },

    #[error("invalid task graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("gain synthesis is degenerate for a single task")]
    DegenerateDimension,

    #[error("gain entry {index} is {value}, must lie in (0, 1)")]
    GainOutOfRange { index: usize, value: f64 },

    #[error("diagonal entry {index} of the kernel is zero; self-transitions are required")]
    ZeroDiagonal { index: usize },

    #[error("kernel is not irreducible")]
    NotIrreducible,

    #[error("support of the synthesized kernel differs from the input kernel")]
    SparsityViolation,

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("trace has {len} epochs, need at least {needed}")]
    TraceTooShort { len: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
