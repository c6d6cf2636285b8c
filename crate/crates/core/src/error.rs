use thiserror::Error;

use crate::linalg::LinalgError;

/// Errors raised by the integrators and their building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("{context}: no convergence after {iterations} iterations (residual {residual:e})")]
    SolverFailure {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tableau `{0}` has no two-point increment form (only explicit tableaus and the implicit midpoint rule are supported)")]
    UnsupportedTableau(String),

    #[error("invariant `{0}` provides no Hessian and finite-difference fallback is disabled")]
    MissingHessian(String),

    #[error("invalid Butcher tableau: {0}")]
    Tableau(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
