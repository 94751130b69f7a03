//! Crate-wide error types.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tensor or layer dimension does not match what the operation expects.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A layer or network configuration that cannot produce a valid output.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Signals, pulses, or datasets too small for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Transplant source and target disagree structurally.
    #[error("transplant mismatch at layer {layer}: {reason}")]
    Transplant { layer: usize, reason: String },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Checkpoint decoding failures, kept distinct so callers can tell a foreign
/// file from a damaged one.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,

    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated checkpoint: {0}")]
    Truncated(String),

    #[error("malformed checkpoint: {0}")]
    Malformed(String),

    /// Spec and stored tensors disagree (e.g. a weight tensor whose shape
    /// does not match the embedded network spec).
    #[error("checkpoint integrity: {0}")]
    Integrity(String),
}
