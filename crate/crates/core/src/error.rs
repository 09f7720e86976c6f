use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh dimensions: {0}")]
    InvalidDimension(String),

    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("trace-back plan was built for a different mesh or quadrature rule")]
    StalePlan,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown initial condition '{0}' (expected gaussian-blob or uniform-perturbed)")]
    UnknownInitialCondition(String),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Hook(String),
}

impl Error {
    /// Strips step context, returning the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(self.root(), Error::NotConverged { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
