use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix has no rows")]
    Empty,

    #[error("row {row} has {found} entries, expected {expected}")]
    NotRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("entry ({row}, {col}) is negative or not finite: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 1")]
    RowSumNotOne { row: usize, sum: f64 },

    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("alphabet of size {size} exceeds the configured cap of {cap}")]
    AlphabetOverflow { size: u128, cap: u128 },

    #[error("all weights are zero")]
    AllZeroWeights,

    #[error("codebooks need {needed} symbols, above the memory cap of {cap}")]
    MemoryCapExceeded { needed: u128, cap: u128 },

    #[error("stage {stage}: no candidate passes the decoding threshold")]
    NoneTypical { stage: &'static str },

    #[error("stage {stage}: more than one candidate passes the decoding threshold")]
    Ambiguous { stage: &'static str },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
