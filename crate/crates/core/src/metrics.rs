// SPDX-License-Identifier: Apache-2.0

//! Labeling quality measures: unlabeled rate and one-vs-rest precision,
//! recall and F1 with a macro average.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Fraction of entries that carry no label.
pub fn unlabeled_rate(labels: &[Option<usize>]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|l| l.is_none()).count() as f64 / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub r_unlabeled: f64,
    pub per_class: Vec<ClassScore>,
    pub macro_f1: f64,
    /// `confusion[t][p]` counts samples of true class t predicted as p.
    pub confusion: Vec<Vec<usize>>,
    /// Per true class, samples left without a label.
    pub unassigned: Vec<usize>,
    #[serde(default)]
    pub wall_times: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum::<usize>() + self.unassigned.iter().sum::<usize>()
    }
}

/// Scores `predicted` against `truth`. `None` predictions count as a false
/// negative for their true class and a false positive for no class.
pub fn f1_report(predicted: &[Option<usize>], truth: &[usize]) -> Result<EvalReport> {
    if predicted.len() != truth.len() {
        return Err(CoreError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    let p = truth
        .iter()
        .copied()
        .chain(predicted.iter().flatten().copied())
        .max()
        .map_or(0, |m| m + 1);
    let mut confusion = vec![vec![0usize; p]; p];
    let mut unassigned = vec![0usize; p];
    for (pred, &t) in predicted.iter().zip(truth) {
        match pred {
            Some(c) => confusion[t][*c] += 1,
            None => unassigned[t] += 1,
        }
    }
    let mut per_class = Vec::new();
    for c in 0..p {
        let support = confusion[c].iter().sum::<usize>() + unassigned[c];
        if support == 0 {
            continue;
        }
        let tp = confusion[c][c] as f64;
        let predicted_c: usize = (0..p).map(|t| confusion[t][c]).sum();
        let precision = if predicted_c == 0 { 0.0 } else { tp / predicted_c as f64 };
        let recall = tp / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassScore {
            class: c,
            support,
            precision,
            recall,
            f1,
        });
    }
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|s| s.f1).sum::<f64>() / per_class.len() as f64
    };
    Ok(EvalReport {
        r_unlabeled: unlabeled_rate(predicted),
        per_class,
        macro_f1,
        confusion,
        unassigned,
        wall_times: BTreeMap::new(),
    })
}

/// Convenience for fully labeled predictions.
pub fn f1_report_hard(predicted: &[usize], truth: &[usize]) -> Result<EvalReport> {
    let wrapped: Vec<Option<usize>> = predicted.iter().map(|&c| Some(c)).collect();
    f1_report(&wrapped, truth)
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(CoreError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}
