use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is not connected")]
    Disconnected,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("size cap exceeded: {what} ({size} > {cap})")]
    CapExceeded { what: &'static str, size: usize, cap: usize },
    #[error("rejection sampler gave up after {0} attempts")]
    RejectionCap(u64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
