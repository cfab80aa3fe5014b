use thiserror::Error;

/// Errors produced by graph construction, scoring and metric computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid arc {index}: {reason}")]
    InvalidArc { index: usize, reason: String },

    #[error("label sequence is empty")]
    EmptyLabels,

    #[error("label {label} out of range 1..={max}")]
    LabelOutOfRange { label: i32, max: i32 },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("intersection has no accepting path")]
    NoValidPath,

    #[error("lattice is empty")]
    EmptyLattice,

    #[error("lattice is not acyclic")]
    Cyclic,

    #[error("lattice has no frame annotations")]
    MissingFrameInfo,

    #[error("lattice has no emit annotations")]
    MissingEmitInfo,

    #[error("invalid vocabulary size {0}")]
    InvalidVocabSize(usize),

    #[error("bad matrix shape: {0}")]
    BadShape(String),

    #[error("row {0} is entirely -inf")]
    AllNegInfRow(usize),

    #[error("row {row} is not normalized (log-sum-exp = {lse})")]
    NotNormalized { row: usize, lse: f64 },

    #[error("invalid log-probability {value} at ({row}, {col})")]
    InvalidLogProb { row: usize, col: usize, value: f64 },

    #[error("no valid alignment: {frames} frames, at least {required} required")]
    NoValidAlignment { frames: usize, required: usize },

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("invalid penalty scale {0}")]
    InvalidLambda(f64),

    #[error("invalid frame shift {0}")]
    InvalidFrameShift(f64),

    #[error("no matched words")]
    NoMatchedWords,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
