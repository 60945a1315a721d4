use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    /// A residual, loss or gradient came back NaN or infinite.
    #[error("non-finite {what} at point {point:?}")]
    NumericalFailure { what: &'static str, point: Vec<f64> },

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// The regularizer has no closed-form subdifferential (or the requested
    /// subsolver needs a structure the problem does not have).
    #[error("unsupported regularizer: {0}")]
    UnsupportedRegularizer(String),

    #[error("subproblem stalled after {iters} inner iterations (residual {residual:e})")]
    SubproblemStall {
        iters: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, SolveError>;
