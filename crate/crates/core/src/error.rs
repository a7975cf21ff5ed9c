use thiserror::Error;

/// Errors raised by validation, the exact engines, and the bound formulas.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability at index {index} is negative ({value})")]
    NegativeProbability { index: usize, value: String },

    #[error("probabilities sum to {sum}, deviating from 1 by {deviation}")]
    SumNotOne { sum: String, deviation: String },

    #[error("duplicate label {label:?}")]
    DuplicateLabel { label: String },

    #[error("unknown label {label:?}")]
    UnknownLabel { label: String },

    #[error("problem size {size} exceeds the guard {guard}")]
    TooLarge { size: u64, guard: u64 },

    #[error("distributions differ at {count} labels; a two-point family needs at most 2")]
    NotTwoPoint { count: usize },

    #[error("minimum differing probability is not positive; bound does not apply")]
    PbarNotPositive,

    #[error("point masses must be positive with total at most 1 (p={p}, p'={p_prime})")]
    NonpositiveMass { p: f64, p_prime: f64 },

    #[error("argument out of range: {what}")]
    OutOfRange { what: String },

    #[error("cannot parse {token:?} as a probability")]
    BadNumber { token: String },

    #[error("malformed input: {what}")]
    BadInput { what: String },

    #[error("output failed: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn out_of_range(what: impl Into<String>) -> Self {
        Error::OutOfRange { what: what.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
