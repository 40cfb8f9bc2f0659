//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation contract (mismatched dimensions, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical failure with a diagnostic (non-PSD covariance, non-finite loss, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Training produced a non-finite quantity; the message carries term-level diagnostics.
    #[error("training error: {0}")]
    Training(String),

    /// Invalid configuration or unusable checkpoint metadata.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("png error: {0}")]
    Png(String),
}

impl From<png::EncodingError> for Error {
    fn from(e: png::EncodingError) -> Self {
        Error::Png(e.to_string())
    }
}

impl From<png::DecodingError> for Error {
    fn from(e: png::DecodingError) -> Self {
        Error::Png(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for [`Error::Contract`] with a formatted message.
#[macro_export]
macro_rules! contract_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(format!($($arg)*))
    };
}
