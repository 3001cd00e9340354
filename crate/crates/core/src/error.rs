use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("symmetry violation: {0}")]
    Symmetry(String),

    #[error("spin labeling failed: {0}")]
    Labeling(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("window too small: {0}")]
    Window(String),

    #[error("property violation: {0}")]
    Property(String),

    #[error("cache integrity error in {path}: {reason}")]
    Integrity { path: PathBuf, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
