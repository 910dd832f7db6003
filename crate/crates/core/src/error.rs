use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed WAV header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("unsupported WAV encoding in {path}: {reason}")]
    UnsupportedCodec { path: PathBuf, reason: String },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty audio clip")]
    EmptyClip,
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(u32),
    #[error("invalid band [{low}, {high}] Hz for sample rate {sample_rate}")]
    InvalidBand {
        low: f64,
        high: f64,
        sample_rate: u32,
    },
    #[error("unknown codec kind `{0}`")]
    UnknownCodec(String),
    #[error("unknown fake system `{0}`")]
    UnknownSystem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence of {tokens} tokens exceeds the positional table ({max_tokens})")]
    TokenOverflow { tokens: usize, max_tokens: usize },

    #[error("dataset must contain both classes, found only {0}")]
    SingleClass(&'static str),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pool too small: {0}")]
    PoolTooSmall(String),

    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint corrupt: {0}")]
    Corrupt(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
