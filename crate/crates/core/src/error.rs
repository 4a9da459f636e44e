use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate element {element}: determinant {det:e}")]
    DegenerateElement { element: usize, det: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("Gauss-Newton did not converge after {iterations} iterations (residual history: {history:?})")]
    NonConvergence {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Configuration(msg.into())
}
