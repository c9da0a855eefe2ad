use std::io;

/// Errors produced anywhere in the geometry pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },
    #[error("unknown action token {0:?}")]
    UnknownAction(String),
    #[error("frame {frame}: vertex count {found} does not match reference ({expected})")]
    VertexCountMismatch { frame: usize, expected: usize, found: usize },
    #[error("frame indices not contiguous: expected {expected}, found {found}")]
    NonContiguousFrames { expected: u32, found: u32 },
    #[error("sequence has {0} frames, at least 4 are required")]
    SequenceTooShort(usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask mismatch: {0}")]
    MaskMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn malformed(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Malformed { what, reason: reason.into() }
}
