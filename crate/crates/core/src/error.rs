use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input at index {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// State became non-finite during integration.
    #[error("numerical divergence at step {step}: {coordinate} is not finite")]
    Diverged { step: usize, coordinate: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
