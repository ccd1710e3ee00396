use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error on {path}: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("unsupported wav format: {0}")]
    WavFormat(String),

    #[error("invalid audio clip: {0}")]
    InvalidClip(String),

    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),

    #[error("manifest parse error at line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {needed} inputs, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("class `{0}` has no samples")]
    EmptyClass(&'static str),

    #[error("k-means degenerated: {0}")]
    DegenerateClusters(String),

    #[error("objective is not finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
