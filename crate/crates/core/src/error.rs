//! Error types shared across the pipeline.

use std::path::PathBuf;

/// Top-level error for pipeline operations.
///
/// The CLI maps variants onto process exit codes: argument/configuration
/// errors exit 2, I/O errors exit 3, training or transfer failures exit 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (bad schedule parameters, unknown hook layer,
    /// malformed config file, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid argument (shape mismatch, out-of-range class index, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// Filesystem or encoding failure, with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// PNG decoding failure.
    #[error("png error on {path}: {message}")]
    Png { path: PathBuf, message: String },

    /// Training or transfer failure (divergence, missing checkpoint, ...).
    #[error("training/transfer error: {0}")]
    Training(String),

    /// A statistical test was asked for with too little data.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::InsufficientData(_) => 2,
            Error::Io { .. } | Error::Png { .. } => 3,
            Error::Training(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
