use thiserror::Error;

use crate::solve::SolveReport;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel singularity: {0}")]
    Singularity(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure support: {0}")]
    MeasureSupport(String),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver did not converge after {} iterations (relative residual {:.3e})", .0.iterations, .0.relative_residual)]
    Convergence(SolveReport),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("divergent potential: {0}")]
    DivergentPotential(String),
    #[error("bound violated at {witness:?}: {message}")]
    Bound { message: String, witness: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
