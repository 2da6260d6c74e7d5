use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range [0, {len})")]
    Index { index: usize, len: usize },

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// Image IDs shared between partitions that must be disjoint.
    #[error("leakage: {} image id(s) shared between partitions: {}", ids.len(), preview(ids))]
    Leakage { ids: Vec<String> },

    #[error("bounds error: {0}")]
    Bounds(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... (+{})", ids.len() - SHOWN));
    }
    s
}
