use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input outside a function's domain (e.g. a non-finite margin).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed LIBSVM input. `line` is 1-based, `offset` is the byte offset
    /// of the offending token from the start of the stream.
    #[error("parse error at line {line}, byte {offset}: {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },

    /// Invalid configuration or parameters.
    #[error("config error: {0}")]
    Config(String),

    /// Vector lengths or supports that do not match the problem.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A precondition of an algorithm variant is not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Non-finite iterates encountered during a run.
    #[error("diverged at round {round}: {message}")]
    Diverged { round: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
