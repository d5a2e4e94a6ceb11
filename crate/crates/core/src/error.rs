use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside an operation's domain.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A configured work budget was exhausted before an exact answer was reached.
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Error {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
