use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, KanError>;

#[derive(Debug, Error)]
pub enum KanError {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("singular system: pivot {pivot:e} at column {column} below tolerance {tolerance:e}")]
    Singular {
        column: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("format error in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (max |param| = {max_abs_param:e})"
    )]
    NonFinite {
        epoch: usize,
        batch: usize,
        max_abs_param: f64,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KanError {
    pub(crate) fn shape(op: &'static str, left: impl Into<String>, right: impl Into<String>) -> Self {
        KanError::Shape {
            op,
            left: left.into(),
            right: right.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KanError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        KanError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
