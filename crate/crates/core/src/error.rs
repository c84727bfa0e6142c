use std::path::PathBuf;

use thiserror::Error;

use crate::schema::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {}", join_violations(.0))]
    Schema(Vec<Violation>),

    #[error("header/schema mismatch: {0}")]
    HeaderMismatch(String),

    #[error("row {row}, column {column}: cannot parse {value:?} ({reason})")]
    Parse {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("annotation line {line}: {reason}")]
    Annotation { line: usize, reason: String },

    #[error("dataset smaller than k: {persons} persons, k = {k}")]
    TooFewRecords { persons: usize, k: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("release does not match the original inputs: {0}")]
    Release(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
