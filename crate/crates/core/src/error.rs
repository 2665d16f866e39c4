use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a formula (negative gain, zero bandwidth, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input for which the requested quantity is undefined (0/0 visibility, no extrema, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{channel} stream is not sorted at index {index}")]
    UnsortedStream { channel: &'static str, index: usize },

    #[error("rate {rate} exceeds thinning bound {bound} at t = {time} s")]
    RateBoundExceeded { time: f64, rate: f64, bound: f64 },

    #[error("expected {expected} tags exceeds the memory cap of {cap}")]
    TagCapExceeded { expected: f64, cap: u64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code for this error: 2 for invalid input, 3 for an
    /// analysis that cannot produce a number, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 3,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
