//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid distribution: {0}")]
    InvalidDist(String),
    #[error("empty belief: {0}")]
    EmptyBelief(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported backend: {0}")]
    UnsupportedBackend(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("degenerate market: {0}")]
    MarketDegenerate(String),
    #[error("estimate not at optimum: star = {star}")]
    SolverQuality { star: f64 },
    #[error("infeasible hypothesis point: {0}")]
    InfeasiblePoint(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("belief is not policy-coherent: {0}")]
    Coherence(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scenario validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
