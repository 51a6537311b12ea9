use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model file format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported model file version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("ingestion error in {frame}: {message}")]
    Ingestion { frame: String, message: String },

    #[error("training diverged at step {step}: {message}{}", checkpoint_hint(.last_checkpoint))]
    Training {
        step: usize,
        message: String,
        last_checkpoint: Option<PathBuf>,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn checkpoint_hint(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" (last good checkpoint: {})", p.display()),
        None => " (no checkpoint written yet)".to_string(),
    }
}
