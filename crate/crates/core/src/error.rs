use thiserror::Error;

/// Errors raised by the percolation laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FppError {
    #[error("points {from} and {to} are not adjacent in the lattice")]
    NotAdjacent { from: String, to: String },

    #[error("invalid generating set: {0}")]
    InvalidLattice(String),

    #[error("invalid weight law: {0}")]
    InvalidLaw(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("integer overflow in lattice arithmetic")]
    Overflow,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument outside its domain: {0}")]
    DomainError(String),

    #[error("search region is empty (radius {0})")]
    EmptySearchRegion(i64),

    #[error("scale below threshold: {value} < alpha0 = {alpha0}")]
    ThresholdViolation { value: f64, alpha0: f64 },

    #[error("degenerate query: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = FppError> = std::result::Result<T, E>;
