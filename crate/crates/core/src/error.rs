use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("expected a {expected}-channel image, got {actual} channels")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    TooSmall { width: usize, height: usize, min: usize },

    #[error("rotation angle {0} is outside [90, 180] degrees")]
    AngleOutOfRange(f64),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("need >= 2 frames, got {0}")]
    TooFewFrames(usize),

    #[error("invalid training data: {0}")]
    InvalidTrainingData(String),

    #[error("non-finite feature value")]
    NonFinite,

    #[error("unsupported model format version {0}")]
    VersionMismatch(u16),

    #[error("model payload is truncated")]
    Truncated,

    #[error("model checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("instance {id}: {reason}")]
    Instance { id: String, reason: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("out-of-order frame: timestamp {got} ms after {last} ms")]
    OutOfOrder { last: f64, got: f64 },

    #[error("session already holds {0} frames")]
    SessionFull(usize),

    #[error("{0}")]
    Experiment(String),

    #[error("io error at {path}: {source}")]
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
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
