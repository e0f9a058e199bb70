use thiserror::Error;

/// Errors raised by the waveform, filter and metrics routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty buffer")]
    EmptyBuffer,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("no coefficient table for overlap factor K = {0}")]
    NoCoefficientTable(usize),
    #[error("subcarrier not equalizable: gain of subcarrier {0} is zero")]
    NotEqualizable(usize),
    #[error("insufficient input: need {needed} samples, got {got}")]
    InsufficientInput { needed: usize, got: usize },
    #[error("zero power: normalization undefined")]
    ZeroPower,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for command-line use: 2 for bad input or
    /// configuration, 3 for failures that arise while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotEqualizable(_) | Error::ZeroPower | Error::NonFinite(_) | Error::InsufficientInput { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn mismatch(expected: impl ToString, got: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
