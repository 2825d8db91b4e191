// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{CoreError, Result};
use crate::rng::{permutation, seeded_rng};

/// Disjoint labeled/unlabeled index sets covering the dataset, both sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSplit {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

impl SeedSplit {
    /// Builds a split from an explicit labeled set.
    pub fn from_labeled(n: usize, mut labeled: Vec<usize>) -> Result<Self> {
        labeled.sort_unstable();
        labeled.dedup();
        if labeled.last().is_some_and(|&i| i >= n) {
            return Err(CoreError::InvalidSplit("labeled index out of range".into()));
        }
        let mut mask = vec![false; n];
        labeled.iter().for_each(|&i| mask[i] = true);
        let unlabeled = (0..n).filter(|&i| !mask[i]).collect();
        Ok(Self { labeled, unlabeled })
    }

    pub fn n(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_labeled_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        self.labeled.iter().for_each(|&i| mask[i] = true);
        mask
    }
}

/// Draws round((1 − r_unlabeled)·n) seeds. When that budget covers every
/// class the draw is stratified: quotas proportional to class sizes
/// (largest remainder), at least one per class. Otherwise uniform.
pub fn make_split(ds: &Dataset, r_unlabeled: f64, seed: u64) -> Result<SeedSplit> {
    if !(0.0..1.0).contains(&r_unlabeled) {
        return Err(CoreError::InvalidSplit(format!(
            "unlabeled rate {r_unlabeled} must lie in [0, 1)"
        )));
    }
    let n = ds.len();
    let budget = (((1.0 - r_unlabeled) * n as f64).round() as usize).min(n);
    if budget == 0 {
        return Err(CoreError::InvalidSplit(format!(
            "unlabeled rate {r_unlabeled} leaves no seed among {n} samples"
        )));
    }
    let mut rng = seeded_rng(seed);
    let order = permutation(&mut rng, n);
    let counts = ds.class_counts();
    let present = counts.iter().filter(|&&c| c > 0).count();

    let labeled: Vec<usize> = if budget >= present && budget < n {
        let quotas = stratified_quotas(&counts, budget);
        let mut taken = vec![0usize; counts.len()];
        let mut out = Vec::with_capacity(budget);
        for &i in &order {
            let c = ds.truth[i];
            if taken[c] < quotas[c] {
                taken[c] += 1;
                out.push(i);
            }
        }
        out
    } else {
        order.into_iter().take(budget).collect()
    };
    SeedSplit::from_labeled(n, labeled)
}

fn stratified_quotas(counts: &[usize], budget: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let mut quotas: Vec<usize> = counts
        .iter()
        .map(|&c| if c == 0 { 0 } else { ((budget * c) / n).max(1).min(c) })
        .collect();
    let mut assigned: usize = quotas.iter().sum();
    // Trim from the largest quotas if the minimum-one rule overshot.
    while assigned > budget {
        let c = (0..counts.len()).filter(|&c| quotas[c] > 1).max_by_key(|&c| (quotas[c], usize::MAX - c)).expect("budget >= class count");
        quotas[c] -= 1;
        assigned -= 1;
    }
    // Largest remainder for what is left; ties go to the lower class id.
    let mut order: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    order.sort_by(|&a, &b| {
        let ra = (budget * counts[a]) % n;
        let rb = (budget * counts[b]) % n;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    let mut k = 0;
    while assigned < budget {
        let c = order[k % order.len()];
        if quotas[c] < counts[c] {
            quotas[c] += 1;
            assigned += 1;
        }
        k += 1;
    }
    quotas
}
