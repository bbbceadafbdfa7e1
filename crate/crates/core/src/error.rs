//! Crate-wide error type.
//!
//! Variants are grouped by where the fault lies: malformed query text
//! ([`BnrError::Parse`]), invalid configuration ([`BnrError::Config`]),
//! inconsistent data ([`BnrError::Data`]), and I/O ([`BnrError::Io`]).
//! The CLI maps these onto its exit codes.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, BnrError>;

#[derive(Debug, Error)]
pub enum BnrError {
    /// Query text that does not conform to the grammar. `position` is the
    /// byte offset of the offending clause in the input string.
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// A configuration value outside its documented domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Inconsistent or unusable data (duplicate ids, empty catalogs, missing
    /// referenced items, …).
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite value surfaced where the math requires finite numbers
    /// (logits, objective terms, gradients).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BnrError {
    /// Shorthand for a parse error.
    pub fn parse(position: usize, message: impl Into<String>) -> Self {
        BnrError::Parse {
            position,
            message: message.into(),
        }
    }

    /// Shorthand for a configuration error.
    pub fn config(message: impl Into<String>) -> Self {
        BnrError::Config(message.into())
    }

    /// Shorthand for a data error.
    pub fn data(message: impl Into<String>) -> Self {
        BnrError::Data(message.into())
    }

    /// Shorthand for a numeric error.
    pub fn numeric(message: impl Into<String>) -> Self {
        BnrError::Numeric(message.into())
    }
}
