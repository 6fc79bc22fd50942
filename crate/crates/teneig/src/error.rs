use thiserror::Error;

/// Errors produced by tensor construction, contraction and the solvers.
#[derive(Debug, Error)]
pub enum TeneigError {
    #[error("dimension mismatch: tensor has dim {expected}, vector has dim {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid tensor shape: order {order}, dim {dim}")]
    InvalidShape { order: usize, dim: usize },

    #[error("tensor order must be even for spectral solves, got {0}")]
    OddOrder(usize),

    #[error("nonfinite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dense storage budget exceeded: need {needed} entries, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective evaluation failed: {0}")]
    EvalFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TeneigError>;
