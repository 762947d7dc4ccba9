use thiserror::Error;

pub type Result<T> = std::result::Result<T, IslError>;

#[derive(Debug, Error)]
pub enum IslError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),

    #[error("invalid target spec: {0}")]
    InvalidTarget(String),

    #[error("invalid generator spec: {0}")]
    InvalidGenerator(String),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("tape already consumed by a backward pass")]
    TapeConsumed,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IslError {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        IslError::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
