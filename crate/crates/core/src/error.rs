use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// The variants are coarse on purpose: the command-line driver maps each one
/// to a distinct exit status.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value is out of its allowed range.
    #[error("config error: {0}")]
    Config(String),

    /// A single input record failed validation.
    #[error("{}: line {line}: {message}", source_name.display())]
    Record {
        source_name: PathBuf,
        line: usize,
        message: String,
    },

    /// Input data is invalid as a whole (duplicate ids, empty corpus, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    /// Dimensions of two operands disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
