use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing {split} split file: {path}")]
    MissingSplit { split: String, path: PathBuf },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Validation(String),

    #[error("training labels for `{trait_name}` have zero range; cannot normalize")]
    DegenerateLabels { trait_name: String },

    #[error("R^2 undefined for {context}: labels have zero variance")]
    DegenerateVariance { context: String },

    #[error("config: {0}")]
    Config(String),

    #[error("missing resource: {0}")]
    Resource(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("hyperparameter search failed: all {attempted} trials diverged")]
    SearchFailed { attempted: usize, log: Vec<String> },

    #[error("bundle at {dir} is incomplete: missing {part}")]
    BundleIncomplete { part: String, dir: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to. Usage and configuration
    /// mistakes exit with 2 (matching clap); runtime failures exit with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) => 2,
            _ => 1,
        }
    }
}
