// SPDX-License-Identifier: Apache-2.0

//! Labeling sessions over 2-D views: lasso selections, the purity rule,
//! subset reprojection, replayable event logs and a scripted annotator.

pub mod error;
pub mod eventlog;
pub mod geometry;
pub mod ledger;
pub mod oracle;
pub mod session;

pub use error::{Result, SessionError};
pub use geometry::SelectionRegion;
pub use ledger::{ExportEntry, LabelLedger, LabelSource, LabelStatus};
pub use session::{reduce_scope, Outcome, RejectReason, Resolution, SelectionRecord, Session, SessionConfig, ViewNode};
