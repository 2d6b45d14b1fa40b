use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or inconsistent.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An API was called out of order (e.g. observe before select).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Load {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("replay dump rejected: {0}")]
    Replay(String),

    /// An episode failed or panicked.
    #[error("episode seed {seed} policy {policy} failed: {message}")]
    Episode {
        seed: u64,
        policy: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Load { .. } | Error::Json(_) => 2,
            Error::Io { .. } => 3,
            Error::Replay(_) => 4,
            Error::Domain(_) | Error::Usage(_) | Error::Episode { .. } => 1,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
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
}
