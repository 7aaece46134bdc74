use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("device failure in round {round}: {reason}")]
    Device { round: usize, reason: String },

    #[error("weak design construction failed: {0}")]
    DesignConstruction(String),

    #[error("malformed message: {0}")]
    Message(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Hex(#[from] hex::FromHexError),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
