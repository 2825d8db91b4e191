// SPDX-License-Identifier: Apache-2.0

//! Datasets: synthetic generators, MNIST IDX ingestion, preprocessing,
//! seed splits and the on-disk dataset record.

mod mnist;
mod preprocess;
mod record;
mod split;
mod synthetic;

pub use mnist::{load_mnist_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use preprocess::{preprocess, PreprocessMode, PreprocessSpec};
pub use record::{read_dataset, read_dataset_file, write_dataset, write_dataset_file};
pub use split::{make_split, SeedSplit};
pub use synthetic::{gen_four_gaussians, gen_two_moons, gen_x_shape, generate, FOUR_CLASS_COVARIANCE, FOUR_CLASS_MEANS};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Where a dataset came from; enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generator {
        name: String,
        params: Vec<(String, f64)>,
        seed: u64,
    },
    Files {
        paths: Vec<String>,
    },
    Subset {
        parent: Box<Provenance>,
        indices_seed: u64,
        size: usize,
    },
}

/// Samples (n×D), ground-truth class ids and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Matrix,
    pub truth: Vec<usize>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Matrix, truth: Vec<usize>, provenance: Provenance) -> Result<Self> {
        if samples.rows() != truth.len() {
            return Err(CoreError::LengthMismatch {
                left: samples.rows(),
                right: truth.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            samples,
            truth,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.samples.cols()
    }

    /// Number of classes p (largest id + 1).
    pub fn num_classes(&self) -> usize {
        self.truth.iter().max().map_or(0, |m| m + 1)
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes()];
        for &t in &self.truth {
            c[t] += 1;
        }
        c
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            samples: self.samples.select_rows(indices),
            truth: indices.iter().map(|&i| self.truth[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Random subset of `size` samples drawn without replacement, preserving
    /// dataset order of the chosen rows.
    pub fn random_subset(&self, size: usize, seed: u64) -> Dataset {
        let mut rng = crate::rng::seeded_rng(seed);
        let mut idx = crate::rng::permutation(&mut rng, self.len());
        idx.truncate(size.min(self.len()));
        idx.sort_unstable();
        let mut out = self.subset(&idx);
        out.provenance = Provenance::Subset {
            parent: Box::new(self.provenance.clone()),
            indices_seed: seed,
            size: idx.len(),
        };
        out
    }
}
