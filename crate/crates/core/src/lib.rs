// SPDX-License-Identifier: Apache-2.0

//! Numerical core of the PVIL labeling workbench: dense linear algebra,
//! dimensionality reduction, datasets, label propagation and metrics.

pub mod datasets;
pub mod distance;
pub mod embed;
pub mod error;
pub mod labelprop;
pub mod linalg;
pub mod logistic;
pub mod matrix;
pub mod metrics;
pub mod rng;

pub use error::{CoreError, Result};
pub use matrix::Matrix;
