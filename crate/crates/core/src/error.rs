//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A JSONL record violated the event schema.
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    /// Two records share the (tx, kind, wallet, pool, ts) key.
    #[error("line {line}: duplicate event {key}")]
    DuplicateEvent { line: usize, key: String },

    #[error("observation end {observation_end} precedes last event ts {max_ts}")]
    InvalidWindow { observation_end: i64, max_ts: i64 },

    #[error("unknown fee tier {0} ppm")]
    UnknownFeeTier(u32),

    #[error("invalid blueprint config: {0}")]
    InvalidConfig(String),

    #[error("sigma must be non-negative, got {0}")]
    InvalidSigma(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("val fraction must lie in (0, 1), got {0}")]
    InvalidValFraction(f64),

    #[error("need at least {need} rows, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing score for wallet {0}")]
    MissingScore(String),

    #[error("report has no wallets")]
    EmptyReport,

    #[error("invalid archetype mix: {0}")]
    InvalidMix(String),

    #[error("invalid model config: {0}")]
    InvalidModelConfig(String),

    #[error("invalid train config: {0}")]
    InvalidTrainConfig(String),

    #[error("model has no normalizer stats; train or load a checkpoint first")]
    MissingNormalizer,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
