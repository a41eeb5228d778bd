use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, mode, range).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown item {0}")]
    InvalidItem(usize),

    #[error("unknown user {0}")]
    UnknownUser(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error("model parameters are untrained")]
    Untrained,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
