use thiserror::Error;

/// Errors surfaced by the public evaluator and CLI APIs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dyadic index {k} out of range 1..={max} (generation {eta}, dimension {d})")]
    IndexOutOfRange { eta: u32, d: usize, k: u64, max: u64 },

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("sequence index {0} must be >= 1")]
    SequenceIndex(usize),

    #[error("direction must be a unit vector (|xi| = {0})")]
    NonUnitDirection(f64),

    #[error("block parameters must satisfy 0 < 2s < a < 1 (a = {a}, s = {s})")]
    BlockParams { a: f64, s: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),

    #[error("norm exponent must satisfy r >= 1 (r = {0})")]
    NormExponent(f64),

    #[error("snapshot rasters require d = 2 (d = {0})")]
    RasterDimension(usize),

    #[error("time window [{0}, {1}] straddles a schedule checkpoint")]
    WindowAcrossCheckpoint(f64, f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
