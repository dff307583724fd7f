use thiserror::Error;

/// Errors raised by the model, the solver and the comparative-statics layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("invalid economy parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate economy: {0}")]
    Degenerate(String),

    #[error("non-finite value in {stage} at index {index}")]
    NumericalFailure { stage: &'static str, index: usize },

    #[error("solver did not converge after {iterations} iterations (best residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best_wage_m: Vec<f64>,
        best_wage_f: Vec<f64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
