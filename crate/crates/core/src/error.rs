use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, mismatched factors, malformed scenario files.
    #[error("configuration error: {0}")]
    Config(String),
    /// A requested state would exceed the dense-dimension cap.
    #[error("resource limit: {0}")]
    Resource(String),
    /// A lookup for a label that does not exist.
    #[error("query error: {0}")]
    Query(String),
    /// An operation called out of order, e.g. measuring a party twice.
    #[error("usage error: {0}")]
    Usage(String),
    /// A physical or numerical invariant check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
