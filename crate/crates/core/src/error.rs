use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at record {record}, field `{field}`: {reason}")]
    Parse {
        record: usize,
        field: String,
        reason: String,
    },

    #[error("invalid record {record}, field `{field}`: {reason}")]
    Invalid {
        record: usize,
        field: String,
        reason: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite `{term}` loss at step {step}")]
    NonFinite { term: String, step: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's configuration or input rather than the environment.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
