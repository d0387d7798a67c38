use thiserror::Error;

/// Errors produced by the simulation and learning pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid specification: {0}")]
    Specification(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("schema mismatch: expected width {expected}, got {got}")]
    Schema { expected: usize, got: usize },

    #[error("incompatible transfer: {0}")]
    IncompatibleTransfer(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
