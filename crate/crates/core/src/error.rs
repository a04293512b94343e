use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("latent outside the domain: {0}")]
    Domain(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Every sampled projection missed the error target.
    #[error(
        "no sampled projection met the target {target:e} after {attempts} attempts \
         (best achieved max error {best_error:e})"
    )]
    ProbabilisticFailure {
        target: f64,
        best_error: f64,
        attempts: usize,
    },

    /// A certified bound was violated. Indicates a bug or wrong niceness constants.
    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}
