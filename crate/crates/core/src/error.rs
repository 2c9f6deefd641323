use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    /// A basis expression was evaluated outside its domain (e.g. `1/0`).
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },

    #[error("variable x{} out of range for state dimension {dim}", .index + 1)]
    VariableOutOfRange { index: usize, dim: usize },

    #[error("basis function {index} ({name}): {source}")]
    Basis {
        index: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration blew up at step {step} (t = {time})")]
    Blowup { step: usize, time: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
