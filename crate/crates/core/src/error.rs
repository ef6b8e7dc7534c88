use thiserror::Error;

use crate::sewing::SewingReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncation depth mismatch: expected {expected}, found {found}")]
    DepthMismatch { expected: usize, found: usize },

    #[error("insufficient depth: need {required}, have {available}")]
    InsufficientDepth { required: usize, available: usize },

    #[error("leading coefficient must be {expected}, found {found}")]
    LeadingTerm { expected: f64, found: f64 },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<u32>),

    #[error("standardization needs distinct entries, {0} is repeated")]
    RepeatedEntry(i64),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("index out of range: {0}")]
    IndexRange(String),

    #[error("half-shuffle is undefined on a pair of empty arguments")]
    EmptyHalfShuffle,

    #[error("polynomial has a nonzero constant term")]
    NonZeroConstant,

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("interval [{start}, {end}] lies outside [{min}, {max}]")]
    IntervalOutOfRange { start: f64, end: f64, min: f64, max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("admission test failed on ({s}, {u}, {t}): defect {defect:e} exceeds V = {bound:e}")]
    AdmissionFailed {
        s: f64,
        u: f64,
        t: f64,
        defect: f64,
        bound: f64,
    },

    #[error("no convergence after {} levels, last gap {:e}", .0.levels_used, .0.final_gap)]
    NotConverged(Box<SewingReport>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
