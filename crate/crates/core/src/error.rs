use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time index {index} out of range: {reason}")]
    IndexOutOfRange { index: usize, reason: String },

    #[error("stream too short: need at least {needed} samples, got {got}")]
    StreamTooShort { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("score stream must be declared on the unit interval")]
    NotUnitInterval,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("object at ({row}, {col}) of size {size} does not fit in a {rows}x{cols} frame")]
    OutOfBounds {
        row: usize,
        col: usize,
        size: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid ROC curve: {0}")]
    InvalidRoc(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
