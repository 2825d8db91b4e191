// SPDX-License-Identifier: Apache-2.0

//! Pairwise distances, k-nearest-neighbor graphs and graph geodesics.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Vector norm used for sample distances. L2 unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    #[default]
    L2,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative distance matrix (dense n×n).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and nonnegativity.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(CoreError::ContractViolation("distance matrix must be square".into()));
        }
        let n = m.rows();
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(CoreError::ContractViolation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = m[(i, j)];
                if !(v >= 0.0) || v != m[(j, i)] {
                    return Err(CoreError::ContractViolation(format!(
                        "entry ({i}, {j}) is negative or asymmetric"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            d: m.as_slice().to_vec(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn into_raw(self) -> Vec<f64> {
        self.d
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n, self.n, self.d.clone()).expect("distances are finite")
    }
}

pub fn pairwise_distances(x: &Matrix) -> Result<DistanceMatrix> {
    pairwise_distances_with(x, Metric::L2)
}

pub fn pairwise_distances_with(x: &Matrix, metric: Metric) -> Result<DistanceMatrix> {
    let n = x.rows();
    if n == 0 {
        return Err(CoreError::DegenerateInput("no samples".into()));
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let ri = x.row(i);
        for j in (i + 1)..n {
            let v = metric.distance(ri, x.row(j));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix { n, d })
}

/// Undirected weighted graph stored as a sorted edge list with i < j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl NeighborGraph {
    /// Adjacency lists `(neighbor, weight)`, neighbors ascending.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for list in &mut adj {
            list.sort_by_key(|a| a.0);
        }
        adj
    }

    /// Component id per vertex (ids assigned in order of lowest member).
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut uf = UnionFind::new(self.n);
        for &(i, j, _) in &self.edges {
            uf.union(i, j);
        }
        uf.labels()
    }

    /// Adds, while more than one component remains, the shortest edge that
    /// joins the component of vertex 0's lowest-indexed component to any
    /// other component. Used when a global embedding must be produced from
    /// naturally separated clusters.
    pub fn bridge_components(&mut self, dist: impl Fn(usize, usize) -> f64) {
        loop {
            let (count, labels) = self.components();
            if count <= 1 {
                return;
            }
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.n {
                if labels[i] != 0 {
                    continue;
                }
                for j in 0..self.n {
                    if labels[j] == 0 {
                        continue;
                    }
                    let d = dist(i, j);
                    let better = match best {
                        None => true,
                        Some((bd, bi, bj)) => d < bd || (d == bd && (i.min(j), i.max(j)) < (bi, bj)),
                    };
                    if better {
                        best = Some((d, i.min(j), i.max(j)));
                    }
                }
            }
            let (d, a, b) = best.expect("another component exists");
            self.edges.push((a, b, d));
            self.edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        }
    }
}

/// k nearest neighbors of every point, ties broken by lower index.
fn nearest_lists(n: usize, k: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(n);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        out.push(cand.iter().map(|&(d, j)| (j, d)).collect());
    }
    out
}

fn union_symmetrize(n: usize, lists: Vec<Vec<(usize, f64)>>) -> NeighborGraph {
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (i, list) in lists.into_iter().enumerate() {
        for (j, d) in list {
            edges.push((i.min(j), i.max(j), d));
        }
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    NeighborGraph { n, edges }
}

/// Union-symmetrized k-NN graph; edge weights are the distances.
pub fn knn_graph(d: &DistanceMatrix, k: usize) -> Result<NeighborGraph> {
    let n = d.n();
    check_k(k, n)?;
    Ok(union_symmetrize(n, nearest_lists(n, k, |i, j| d.get(i, j))))
}

/// Same graph as `knn_graph(pairwise_distances(x), k)` without materializing
/// the n×n distance matrix.
pub fn knn_graph_from_points(x: &Matrix, k: usize, metric: Metric) -> Result<NeighborGraph> {
    let n = x.rows();
    check_k(k, n)?;
    Ok(union_symmetrize(
        n,
        nearest_lists(n, k, |i, j| metric.distance(x.row(i), x.row(j))),
    ))
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(CoreError::InvalidParameter(format!(
            "neighbor count k={k} must satisfy 1 <= k < n={n}"
        )));
    }
    Ok(())
}

#[derive(PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All-pairs shortest paths over edge weights (Dijkstra from every source).
pub fn geodesic_distances(g: &NeighborGraph) -> Result<DistanceMatrix> {
    let n = g.n;
    let (count, _) = g.components();
    if count > 1 {
        return Err(CoreError::Disconnected { components: count });
    }
    let adj = g.adjacency();
    let mut d = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        let row = &mut d[s * n..(s + 1) * n];
        row[s] = 0.0;
        heap.push(HeapEntry(0.0, s));
        while let Some(HeapEntry(du, u)) = heap.pop() {
            if du > row[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = du + w;
                if nd < row[v] {
                    row[v] = nd;
                    heap.push(HeapEntry(nd, v));
                }
            }
        }
    }
    // Dijkstra from i and from j can round differently; keep the smaller.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d[i * n + j].min(d[j * n + i]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix { n, d })
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        true
    }

    /// Dense component labels, numbered by first appearance.
    pub fn labels(&mut self) -> (usize, Vec<usize>) {
        let n = self.parent.len();
        let mut map = vec![usize::MAX; n];
        let mut labels = vec![0; n];
        let mut next = 0;
        for i in 0..n {
            let r = self.find(i);
            if map[r] == usize::MAX {
                map[r] = next;
                next += 1;
            }
            labels[i] = map[r];
        }
        (next, labels)
    }
}
