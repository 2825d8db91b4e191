// SPDX-License-Identifier: Apache-2.0

use pvil_core::CoreError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error("session is finished; no further changes are accepted")]
    Finished,
    #[error("session is not finished; finish it before exporting")]
    NotFinished,
    #[error("already at the root view")]
    AtRoot,
    #[error("subset of {size} samples is too small to reproject (need at least 3)")]
    SubsetTooSmall { size: usize },
    #[error("seed label of sample {index} cannot change")]
    SeedImmutable { index: usize },
    #[error("replay diverged at event {event}: {reason}")]
    ReplayMismatch { event: usize, reason: String },
    #[error("event log: {0}")]
    EventLog(String),
}

pub type Result<T> = std::result::Result<T, SessionError>;
