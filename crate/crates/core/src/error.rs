use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("labels must be fully observed for this operation")]
    PartialLabels,

    #[error("clique enumeration exceeded budget of {0} cliques")]
    BudgetExceeded(u64),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training data contains a single class")]
    DegenerateTraining,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model file error: {0}")]
    Model(String),
}

impl Error {
    pub fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
