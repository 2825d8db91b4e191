// SPDX-License-Identifier: Apache-2.0

//! Graph label propagation: kernel affinities on a symmetrized k-NN graph,
//! symmetric normalization S = D^{-1/2} W D^{-1/2}, and the fixed-point
//! iteration F ← λ·S·F + (1 − λ)·Q.

use serde::{Deserialize, Serialize};

use crate::datasets::SeedSplit;
use crate::distance::{knn_graph_from_points, Metric};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Symmetric sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut list in adj {
            list.sort_by_key(|a| a.0);
            for (j, w) in list {
                cols.push(j);
                vals.push(w);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// out = self · f for an n×p row-major block.
    fn mul_block(&self, f: &[f64], p: usize, out: &mut [f64]) {
        for i in 0..self.n {
            let acc = &mut out[i * p..(i + 1) * p];
            acc.iter_mut().for_each(|v| *v = 0.0);
            for (j, w) in self.row(i) {
                for (a, &b) in acc.iter_mut().zip(&f[j * p..(j + 1) * p]) {
                    *a += w * b;
                }
            }
        }
    }
}

/// Kernel bandwidth: fixed, or the reciprocal of the median k-NN edge length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    pub w: SparseSym,
    /// Present after `normalize`.
    pub s: Option<SparseSym>,
    pub gamma: f64,
    pub k: usize,
    pub isolated: Vec<usize>,
}

pub fn build_affinity(x: &Matrix, k: usize, gamma: Gamma) -> Result<AffinityGraph> {
    build_affinity_with(x, k, gamma, Metric::L2)
}

pub fn build_affinity_with(x: &Matrix, k: usize, gamma: Gamma, metric: Metric) -> Result<AffinityGraph> {
    let graph = knn_graph_from_points(x, k, metric)?;
    let gamma = match gamma {
        Gamma::Fixed(g) if g > 0.0 && g.is_finite() => g,
        Gamma::Fixed(g) => return Err(CoreError::InvalidBandwidth(format!("gamma {g} must be positive"))),
        Gamma::Auto => {
            let mut d: Vec<f64> = graph.edges.iter().map(|e| e.2).collect();
            d.sort_by(f64::total_cmp);
            let med = median_sorted(&d);
            if !(med > 0.0) {
                return Err(CoreError::InvalidBandwidth(
                    "median neighbor distance is zero; cannot pick gamma automatically".into(),
                ));
            }
            1.0 / med
        }
    };
    let edges: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .map(|&(i, j, d)| (i, j, (-gamma * d).exp()))
        .collect();
    let w = SparseSym::from_edges(graph.n, &edges);
    let isolated = (0..w.n).filter(|&i| w.row(i).all(|(_, v)| v == 0.0)).collect();
    Ok(AffinityGraph {
        w,
        s: None,
        gamma,
        k,
        isolated,
    })
}

fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        m if m % 2 == 1 => v[m / 2],
        m => 0.5 * (v[m / 2 - 1] + v[m / 2]),
    }
}

/// Computes S = D^{-1/2} W D^{-1/2}.
pub fn normalize(mut g: AffinityGraph) -> Result<AffinityGraph> {
    let n = g.w.n;
    let degree: Vec<f64> = (0..n).map(|i| g.w.row(i).map(|(_, v)| v).sum()).collect();
    let isolated: Vec<usize> = (0..n).filter(|&i| !(degree[i] > 0.0)).collect();
    if !isolated.is_empty() {
        return Err(CoreError::IsolatedVertices(isolated));
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut s = g.w.clone();
    for i in 0..n {
        for idx in s.row_ptr[i]..s.row_ptr[i + 1] {
            let j = s.cols[idx];
            s.vals[idx] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    g.s = Some(s);
    g.isolated.clear();
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpParams {
    pub k: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub gamma: Gamma,
}

impl Default for LpParams {
    fn default() -> Self {
        Self {
            k: 10,
            lambda: 0.99,
            epsilon: 1e-6,
            max_iter: 10_000,
            gamma: Gamma::Auto,
        }
    }
}

/// Per-sample class scores after propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix {
    pub f: Matrix,
    pub iterations: usize,
    pub converged: bool,
    /// Frobenius norm of every update step, in order.
    pub step_norms: Vec<f64>,
}

/// One-hot seed matrix Q (n×p).
pub fn seed_matrix(n: usize, p: usize, split: &SeedSplit, seed_labels: &[usize]) -> Result<Matrix> {
    if split.labeled.len() != seed_labels.len() {
        return Err(CoreError::LengthMismatch {
            left: split.labeled.len(),
            right: seed_labels.len(),
        });
    }
    let mut q = Matrix::zeros(n, p);
    for (&i, &c) in split.labeled.iter().zip(seed_labels) {
        if c >= p {
            return Err(CoreError::InvalidParameter(format!("seed class {c} >= class count {p}")));
        }
        q[(i, c)] = 1.0;
    }
    Ok(q)
}

/// Iterates F ← λSF + (1−λ)Q from F = Q until the step norm drops below
/// `epsilon` or `max_iter` is reached. Seed rows are not clamped.
pub fn propagate(
    g: &AffinityGraph,
    split: &SeedSplit,
    seed_labels: &[usize],
    num_classes: usize,
    lambda: f64,
    epsilon: f64,
    max_iter: usize,
) -> Result<SoftLabelMatrix> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(CoreError::InvalidParameter(format!("lambda {lambda} must lie in (0, 1)")));
    }
    if !(epsilon > 0.0) {
        return Err(CoreError::InvalidParameter("epsilon must be positive".into()));
    }
    let s = g
        .s
        .as_ref()
        .ok_or_else(|| CoreError::ContractViolation("affinity graph is not normalized".into()))?;
    let n = s.n;
    if split.n() != n {
        return Err(CoreError::LengthMismatch { left: split.n(), right: n });
    }
    let p = num_classes;
    let q = seed_matrix(n, p, split, seed_labels)?;
    let q = q.as_slice();
    let mut f = q.to_vec();
    let mut next = vec![0.0; n * p];
    let mut step_norms = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        s.mul_block(&f, p, &mut next);
        let mut step = 0.0;
        for ((nv, &qv), &fv) in next.iter_mut().zip(q).zip(&f) {
            *nv = lambda * *nv + (1.0 - lambda) * qv;
            step += (*nv - fv) * (*nv - fv);
        }
        iterations += 1;
        let step = step.sqrt();
        if !step.is_finite() {
            return Err(CoreError::Divergence { iteration: iterations });
        }
        step_norms.push(step);
        std::mem::swap(&mut f, &mut next);
        if step < epsilon {
            converged = true;
            break;
        }
    }
    Ok(SoftLabelMatrix {
        f: Matrix::from_vec(n, p, f)?,
        iterations,
        converged,
        step_norms,
    })
}

/// Hard labels from soft scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hardened {
    pub labels: Vec<usize>,
    /// Unlabeled samples whose score row was all zero (assigned class 0).
    pub unreached: usize,
}

pub fn harden(f: &SoftLabelMatrix, split: &SeedSplit, seed_labels: &[usize]) -> Hardened {
    let n = f.f.rows();
    let mut labels = vec![0; n];
    let mut unreached = 0;
    for i in 0..n {
        let row = f.f.row(i);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        if row.iter().all(|&v| v == 0.0) {
            unreached += 1;
        }
        labels[i] = best;
    }
    for (&i, &c) in split.labeled.iter().zip(seed_labels) {
        labels[i] = c;
    }
    let seeded_unreached = split.labeled.iter().filter(|&&i| f.f.row(i).iter().all(|&v| v == 0.0)).count();
    if unreached > 0 {
        log::warn!("{} unlabeled samples received no propagated mass", unreached - seeded_unreached);
    }
    Hardened {
        labels,
        unreached: unreached - seeded_unreached,
    }
}

/// Full baseline: affinity, normalization, propagation and hardening.
pub fn run_label_propagation(
    x: &Matrix,
    split: &SeedSplit,
    seed_labels: &[usize],
    num_classes: usize,
    params: &LpParams,
) -> Result<(Hardened, SoftLabelMatrix)> {
    let g = normalize(build_affinity(x, params.k, params.gamma)?)?;
    let soft = propagate(
        &g,
        split,
        seed_labels,
        num_classes,
        params.lambda,
        params.epsilon,
        params.max_iter,
    )?;
    Ok((harden(&soft, split, seed_labels), soft))
}
