use thiserror::Error;

use crate::scaled_prox::RootMethod;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("metric is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("operator has no piecewise-affine descriptor")]
    MissingDescriptor,

    #[error("root finder {method:?} is not applicable: {reason}")]
    NotApplicable { method: RootMethod, reason: String },

    #[error("bracket [{lo}, {hi}] does not contain a sign change (L = {f_lo}, {f_hi})")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder {method:?} stopped after {iterations} iterations with residual {residual:e}")]
    RootNotFound { method: RootMethod, iterations: usize, residual: f64 },

    #[error("scaled prox failed at iteration {iteration}: {source}")]
    ProxFailed {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
