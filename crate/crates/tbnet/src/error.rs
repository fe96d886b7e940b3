use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape or dimension mismatch in a tensor operation. The message names
    /// the offending dimension.
    #[error("{op}: {msg}")]
    Shape { op: &'static str, msg: String },

    #[error("{op}: {channels} channels not divisible by {groups} groups")]
    GroupsIndivisible {
        op: &'static str,
        channels: usize,
        groups: usize,
    },

    #[error("maxpool2d: window {kernel}x{kernel} larger than input {h}x{w}")]
    WindowTooLarge { kernel: usize, h: usize, w: usize },

    #[error("backward: loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("backward already ran on this graph; reset gradients before running again")]
    BackwardTwice,

    #[error("network config rejected: {0}")]
    Config(String),

    #[error("manifest row {row}: unknown label token {token:?}")]
    UnknownLabel { row: usize, token: String },

    #[error("manifest row {row}: duplicate image path {path:?}")]
    DuplicatePath { row: usize, path: PathBuf },

    #[error("manifest row {row}: file not found: {path:?}")]
    MissingFile { row: usize, path: PathBuf },

    #[error("manifest row {row}: {msg}")]
    ManifestFormat { row: usize, msg: String },

    #[error("dataset too small: {n} records, need at least {min}")]
    DatasetTooSmall { n: usize, min: usize },

    #[error("split {split:?} is empty")]
    EmptySplit { split: String },

    #[error("image {path:?}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error("preprocess: {0}")]
    Preprocess(String),

    #[error("checkpoint: bad magic bytes (not a checkpoint file)")]
    CheckpointMagic,

    #[error("checkpoint: format version {found} unsupported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint: checksum mismatch (file corrupt or truncated)")]
    CheckpointChecksum,

    #[error("checkpoint: truncated file ({0})")]
    CheckpointTruncated(String),

    #[error("checkpoint: {0}")]
    CheckpointShape(String),

    #[error("label {0} outside {{0,1}}")]
    InvalidClassLabel(i64),

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f32 },

    #[error("train: {0}")]
    Train(String),

    #[error("universal performance score undefined for non-positive {quantity}")]
    NonPositiveComplexity { quantity: &'static str },

    #[error("search: {0}")]
    Search(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
