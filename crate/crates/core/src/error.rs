use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("input of {got} samples is shorter than the required minimum of {required}")]
    TooShort { required: usize, got: usize },
    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("backward root does not depend on any tensor that requires grad")]
    DetachedRoot,
    #[error("{0} has zero power")]
    ZeroPower(&'static str),
    #[error("permutation search over {0} sources refused (limit is 6)")]
    TooManySources(usize),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("exact meta-gradient refused: {count} parameters exceeds the limit of {limit}")]
    TooManyParams { count: usize, limit: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported audio in {path:?}: {chunk} chunk: {reason}")]
    UnsupportedAudio {
        path: PathBuf,
        chunk: &'static str,
        reason: String,
    },
    #[error("cannot resample from {from} Hz to {to} Hz: ratio is not an integer")]
    ResampleRatio { from: u32, to: u32 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("manifest {path:?}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
