// SPDX-License-Identifier: Apache-2.0

//! Per-sample label status with assignment provenance.

use serde::{Deserialize, Serialize};

use pvil_core::datasets::SeedSplit;

use crate::error::{Result, SessionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LabelStatus {
    Seed { class: usize },
    Assigned { class: usize, selection: usize },
    Unlabeled,
}

impl LabelStatus {
    pub fn class(self) -> Option<usize> {
        match self {
            LabelStatus::Seed { class } | LabelStatus::Assigned { class, .. } => Some(class),
            LabelStatus::Unlabeled => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Seed,
    Assigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportEntry {
    pub index: usize,
    pub class: usize,
    pub source: LabelSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLedger {
    status: Vec<LabelStatus>,
    /// Assigned sample indices in the order they were labeled.
    order: Vec<usize>,
}

impl LabelLedger {
    pub fn from_seeds(split: &SeedSplit, seed_labels: &[usize]) -> Result<Self> {
        if split.labeled.len() != seed_labels.len() {
            return Err(SessionError::InvalidParameter(format!(
                "{} seed indices but {} seed labels",
                split.labeled.len(),
                seed_labels.len()
            )));
        }
        let mut status = vec![LabelStatus::Unlabeled; split.n()];
        for (&i, &class) in split.labeled.iter().zip(seed_labels) {
            status[i] = LabelStatus::Seed { class };
        }
        Ok(Self { status, order: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn status(&self, i: usize) -> LabelStatus {
        self.status[i]
    }

    pub fn class_of(&self, i: usize) -> Option<usize> {
        self.status[i].class()
    }

    /// Labels a sample that currently has none. Returns whether it changed.
    pub fn assign(&mut self, i: usize, class: usize, selection: usize) -> Result<bool> {
        match self.status[i] {
            LabelStatus::Seed { class: c } if c != class => Err(SessionError::SeedImmutable { index: i }),
            LabelStatus::Unlabeled => {
                self.status[i] = LabelStatus::Assigned { class, selection };
                self.order.push(i);
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    pub fn labels(&self) -> Vec<Option<usize>> {
        self.status.iter().map(|s| s.class()).collect()
    }

    pub fn seed_count(&self) -> usize {
        self.status.iter().filter(|s| matches!(s, LabelStatus::Seed { .. })).count()
    }

    pub fn assigned_count(&self) -> usize {
        self.order.len()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.len() - self.seed_count() - self.assigned_count()
    }

    pub fn labeled_count(&self) -> usize {
        self.len() - self.unlabeled_count()
    }

    pub fn unlabeled_rate(&self) -> f64 {
        pvil_core::metrics::unlabeled_rate(&self.labels())
    }

    /// Seeds in index order, then assignments in the order they were made.
    pub fn export(&self) -> Vec<ExportEntry> {
        let mut out: Vec<ExportEntry> = self
            .status
            .iter()
            .enumerate()
            .filter_map(|(index, s)| match s {
                LabelStatus::Seed { class } => Some(ExportEntry {
                    index,
                    class: *class,
                    source: LabelSource::Seed,
                }),
                _ => None,
            })
            .collect();
        out.extend(self.order.iter().map(|&index| ExportEntry {
            index,
            class: self.status[index].class().expect("ordered entries are assigned"),
            source: LabelSource::Assigned,
        }));
        out
    }
}
