use thiserror::Error;

/// Contract violations raised by the pure model layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("feature dimension mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
}

/// A manifest or context field that failed validation, with the path to it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}
