use thiserror::Error;

/// Errors raised by the estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GsaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("value {value} of input {input} lies outside the support of its margin")]
    OutsideSupport { input: usize, value: f64 },

    #[error("model evaluation failed at row {row} (input {input:?}): output {output}")]
    ModelEvaluation {
        row: usize,
        input: Vec<f64>,
        output: f64,
    },

    #[error("degenerate output: {0}")]
    DegenerateOutput(String),

    #[error("budget cap exceeded: {0}")]
    BudgetExceeded(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, GsaError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(GsaError::InvalidArgument(msg.into()))
}
