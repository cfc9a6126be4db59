use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reasoning pipeline.
#[derive(Debug, Error)]
pub enum IrnError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty knowledge base")]
    EmptyKb,
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("id {id} out of bounds (size {size}) for {what}")]
    OutOfBounds {
        what: &'static str,
        id: usize,
        size: usize,
    },
    #[error("relation name collision: `{0}` already exists as a non-inverse relation")]
    NameCollision(String),
    #[error("knowledge base is not inverse-closed")]
    NotInverseClosed,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("no template available for pattern {0}")]
    NoTemplate(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, IrnError>;

impl IrnError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IrnError::Io {
            path: path.into(),
            source,
        }
    }
}
