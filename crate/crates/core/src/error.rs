//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not conform to the operation.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// `backward` requires a scalar loss node.
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("{what} must be a non-empty sequence")]
    EmptySequence { what: &'static str },

    #[error("emoji id {id} out of range (inventory size {len})")]
    EmojiIdOutOfRange { id: usize, len: usize },

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("tensor extents must be positive, got {shape:?}")]
    NonPositiveExtent { shape: Vec<usize> },

    /// Non-finite gradients; the optimizer refused the update.
    #[error("training step diverged: non-finite gradient in '{param}'")]
    Diverged { param: String },

    #[error("model kind mismatch: expected {expected}, checkpoint holds {found}")]
    KindMismatch { expected: String, found: String },

    #[error("training a {kind} model requires a converged base checkpoint")]
    MissingBaseCheckpoint { kind: String },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
