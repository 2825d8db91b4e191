// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the numerical core, dataset handling and metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid dimension: requested {requested}, available {available}")]
    InvalidDimension { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("neighbor graph is disconnected ({components} components); increase k")]
    Disconnected { components: usize },

    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    #[error("perplexity calibration did not converge for point {point}")]
    Calibration { point: usize },

    #[error("invalid bandwidth: {0}")]
    InvalidBandwidth(String),

    #[error("isolated vertices cannot be normalized: {0:?}")]
    IsolatedVertices(Vec<usize>),

    #[error("iteration diverged at step {iteration}")]
    Divergence { iteration: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("training labels cover a single class")]
    SingleClass,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("parse error at byte offset {offset}: {reason}")]
    Parse { offset: u64, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CoreError {
    fn from(err: std::io::Error) -> Self {
        CoreError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
