use thiserror::Error;

pub type Result<T> = std::result::Result<T, CalibError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("parameter `{name}` = {value} outside [{lower}, {upper}]")]
    Domain {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("non-finite evaluation: {0}")]
    Evaluation(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("{failed} of {total} replications failed (more than 1%); first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CalibError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CalibError::InvalidArgument(msg.into())
    }
}
