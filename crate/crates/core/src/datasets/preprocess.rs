// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreprocessMode {
    #[default]
    None,
    Zscore,
    Minmax,
}

/// A preprocessing mode together with per-feature statistics captured
/// at fit time: (mean, std) for zscore or (min, max) for minmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub mode: PreprocessMode,
    pub stats: Vec<(f64, f64)>,
}

fn is_flat(spread: f64, scale: f64) -> bool {
    spread <= 1e-12 * scale.abs().max(1.0)
}

impl PreprocessSpec {
    pub fn fit(mode: PreprocessMode, x: &Matrix) -> Self {
        let d = x.cols();
        let n = x.rows().max(1) as f64;
        let stats = match mode {
            PreprocessMode::None => Vec::new(),
            PreprocessMode::Zscore => {
                let mu = x.column_means();
                let mut var = vec![0.0; d];
                for row in x.iter_rows() {
                    for c in 0..d {
                        var[c] += (row[c] - mu[c]).powi(2);
                    }
                }
                mu.into_iter().zip(var).map(|(m, v)| (m, (v / n).sqrt())).collect()
            }
            PreprocessMode::Minmax => {
                let mut s = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
                for row in x.iter_rows() {
                    for c in 0..d {
                        s[c].0 = s[c].0.min(row[c]);
                        s[c].1 = s[c].1.max(row[c]);
                    }
                }
                s
            }
        };
        Self { mode, stats }
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Result<Matrix> {
        if self.mode == PreprocessMode::None {
            return Ok(x.clone());
        }
        if self.stats.len() != x.cols() {
            return Err(CoreError::LengthMismatch {
                left: self.stats.len(),
                right: x.cols(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, &(a, b)) in out.row_mut(i).iter_mut().zip(&self.stats) {
                match self.mode {
                    PreprocessMode::Zscore if !is_flat(b, a) => *v = (*v - a) / b,
                    PreprocessMode::Minmax if !is_flat(b - a, a) => *v = (*v - a) / (b - a),
                    _ => {}
                }
            }
        }
        Ok(out)
    }

    /// Applies to a dataset; truth and provenance are untouched.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            samples: self.apply_matrix(&ds.samples)?,
            ..ds.clone()
        })
    }
}

/// Fits on `ds` and applies in one go.
pub fn preprocess(ds: &Dataset, mode: PreprocessMode) -> Result<Dataset> {
    PreprocessSpec::fit(mode, &ds.samples).apply(ds)
}
