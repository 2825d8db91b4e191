// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use pvil_core::CoreError;
use pvil_session::SessionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("invalid bench spec: {0}")]
    InvalidSpec(String),
    #[error(
        "MNIST files not found in {dir}: missing {missing}. Expected train-images-idx3-ubyte and \
         train-labels-idx1-ubyte; set PVIL_MNIST_DIR or `mnist_dir` in the spec, or build them with \
         scripts/mnist_from_npm.py"
    )]
    MissingMnist { dir: PathBuf, missing: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
