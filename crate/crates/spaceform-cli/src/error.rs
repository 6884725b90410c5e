use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("projection {0:?} must name three distinct ambient coordinates")]
    BadProjection(Vec<usize>),
    #[error("invalid slice: {0}")]
    InvalidSlice(String),
    #[error(transparent)]
    Core(#[from] spaceform_core::Error),
}

impl CliError {
    pub fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema { pointer: pointer.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
