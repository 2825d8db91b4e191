// SPDX-License-Identifier: Apache-2.0

//! HTTP session service for the labeling workbench: dataset catalog, live
//! sessions with event-log persistence, and the JSON API used by the browser
//! client and scripted tools.

pub mod api;
pub mod datasets;
pub mod error;
pub mod payload;
pub mod store;

pub use api::router;
pub use error::{ApiError, Result};
pub use store::AppState;
