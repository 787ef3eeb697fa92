use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Data does not have the expected shape or encoding.
    #[error("schema error: {0}")]
    Schema(String),
    /// A diagnosis code outside the 27-code label set.
    #[error("label error: {0}")]
    Label(String),
    /// The operation cannot be carried out on this input (too short, empty, unsupported).
    #[error("capability error: {0}")]
    Capability(String),
    #[error("argument error: {0}")]
    Argument(String),
    /// Inputs are inconsistent with each other (e.g. a plan built for another dataset).
    #[error("state error: {0}")]
    State(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Short stable tag for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema(_) => "schema",
            Error::Label(_) => "label",
            Error::Capability(_) => "capability",
            Error::Argument(_) => "argument",
            Error::State(_) => "state",
            Error::Config(_) => "config",
            Error::NonConvergence(_) => "non-convergence",
            Error::Serde(_) => "serde",
        }
    }

    /// Whether the error traces back to user input rather than a failure
    /// inside the pipeline.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Schema(_) | Error::Label(_) | Error::Argument(_) | Error::Config(_) | Error::Serde(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
