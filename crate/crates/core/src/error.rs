use thiserror::Error;

/// Errors reported by the tensor kernels and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("component {component} is degenerate: {detail}")]
    DegenerateComponent { component: usize, detail: String },

    #[error("line search requires a descent direction (d'g = {0:e})")]
    NonDescentDirection(f64),

    #[error("objective produced a non-finite value: {0}")]
    NonFinite(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
