use thiserror::Error;

/// Errors raised by the field, curvature, flow and I/O layers.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {found} does not match grid size {expected}")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite value in {field} at index {index}")]
    NonFinite { field: &'static str, index: usize },

    #[error("gauge factor phi is not positive at index {index} (phi = {value})")]
    GaugeDegenerate { index: usize, value: f64 },

    #[error("fiber radius {field} degenerate at index {index} (value = {value})")]
    DegenerateFiber {
        field: &'static str,
        index: usize,
        value: f64,
    },

    #[error("step rejected: positivity lost in {field} at index {index}")]
    StepRejected { field: &'static str, index: usize },

    #[error("insufficient samples: need {needed}, have {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("no singularity detected: {0}")]
    NoSingularity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = FlowError> = std::result::Result<T, E>;
