use std::path::PathBuf;

/// Unified error type for the whole pipeline.
///
/// The variants are grouped by what the caller can do about them: `Usage`
/// means the request itself is malformed, `Data` means the inputs on disk are
/// unusable, `Checkpoint` means stored training state cannot be trusted, and
/// `Backend` wraps tensor-engine failures that indicate a bug rather than a
/// user mistake.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Checkpoint(String),

    #[error("tensor backend: {0}")]
    Backend(#[from] candle_core::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn checkpoint(msg: impl Into<String>) -> Self {
        Error::Checkpoint(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
