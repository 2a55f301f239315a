use thiserror::Error;

/// Errors raised across the toolkit, grouped by the kind of failure so
/// callers (notably the CLI) can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or length disagreement between numeric containers.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed input data: CSV structure, model files, vocabularies.
    #[error("format error: {0}")]
    Format(String),

    /// Invalid configuration values or combinations.
    #[error("config error: {0}")]
    Config(String),

    /// An operation was called in a state that cannot support it.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Error {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
