// SPDX-License-Identifier: Apache-2.0

//! Two-dimensional embeddings: PCA, classical MDS, ISOMAP and exact t-SNE.

use serde::{Deserialize, Serialize};

use crate::distance::{geodesic_distances, knn_graph_from_points, DistanceMatrix, Metric};
use crate::error::{CoreError, Result};
use crate::linalg::{covariance_matrix, sym_eigendecompose, top_eigenpairs};
use crate::matrix::Matrix;
use crate::rng::{gaussian, seeded_rng};

/// One reduction step: which method ran, with what parameters, on which
/// dataset indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageStep {
    pub method: String,
    pub params: Vec<(String, f64)>,
    pub subset: Vec<usize>,
}

/// Per-sample 2-D coordinates and the chain of reductions behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Matrix,
    pub lineage: Vec<LineageStep>,
}

impl Embedding {
    pub fn new(coords: Matrix, step: LineageStep) -> Result<Self> {
        if coords.rows() != step.subset.len() {
            return Err(CoreError::LengthMismatch {
                left: coords.rows(),
                right: step.subset.len(),
            });
        }
        Ok(Self {
            coords,
            lineage: vec![step],
        })
    }

    /// Dataset indices of the rows, i.e. the subset of the last step.
    pub fn scope(&self) -> &[usize] {
        &self.lineage.last().expect("lineage is never empty").subset
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    pub fn point(&self, row: usize) -> [f64; 2] {
        [self.coords[(row, 0)], self.coords[(row, 1)]]
    }

    /// Prepends parent lineage, keeping this embedding's own step last.
    pub fn with_parent_lineage(mut self, parent: &[LineageStep]) -> Self {
        let mut lineage = parent.to_vec();
        lineage.append(&mut self.lineage);
        self.lineage = lineage;
        self
    }
}

/// Top-`d` principal directions (D×d, orthonormal columns) and the centered
/// data projected on them.
pub fn pca_project(x: &Matrix, d: usize) -> Result<(Matrix, Matrix)> {
    let dims = x.cols();
    if d == 0 || d > dims {
        return Err(CoreError::InvalidDimension {
            requested: d,
            available: dims,
        });
    }
    let cov = covariance_matrix(x)?;
    let eig = sym_eigendecompose(&cov)?;
    let mut basis = Matrix::zeros(dims, d);
    for r in 0..dims {
        for c in 0..d {
            basis[(r, c)] = eig.eigenvectors[(r, c)];
        }
    }
    let projected = x.centered().matmul(&basis)?;
    Ok((basis, projected))
}

/// Classical (Torgerson) MDS. Negative eigenvalues of the double-centered
/// Gram matrix are clamped to zero.
pub fn classical_mds(d: &DistanceMatrix, dims: usize) -> Result<Matrix> {
    if dims == 0 {
        return Err(CoreError::InvalidDimension {
            requested: 0,
            available: d.n(),
        });
    }
    let n = d.n();
    let mut b = d.clone().into_raw();
    double_center_squared(&mut b, n);
    let take = dims.min(n);
    let eig = if n <= 300 {
        let m = Matrix::from_vec(n, n, b)?;
        sym_eigendecompose(&m)?
    } else {
        top_eigenpairs(n, take, 1e-10, |x, y| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = crate::linalg::dot(&b[i * n..(i + 1) * n], x);
            }
        })?
    };
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues.first().map_or(true, |&l| l <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(CoreError::DegenerateEmbedding(
            "double-centered Gram matrix has no positive eigenvalue".into(),
        ));
    }
    let mut out = Matrix::zeros(n, dims);
    for k in 0..take {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        for i in 0..n {
            out[(i, k)] = eig.eigenvectors[(i, k)] * s;
        }
    }
    Ok(out)
}

/// In place: D → −½·J·(D∘D)·J.
fn double_center_squared(b: &mut [f64], n: usize) {
    b.iter_mut().for_each(|v| *v = *v * *v);
    let mut row_means = vec![0.0; n];
    for i in 0..n {
        row_means[i] = b[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64;
    }
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            // D² is symmetric, so column means equal row means.
            b[i * n + j] = -0.5 * (b[i * n + j] - row_means[i] - row_means[j] + grand);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (b[i * n + j] + b[j * n + i]);
            b[i * n + j] = v;
            b[j * n + i] = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsomapParams {
    pub k: usize,
    /// Join disconnected k-NN components with their shortest connecting edges
    /// instead of failing.
    #[serde(default)]
    pub bridge: bool,
}

impl Default for IsomapParams {
    fn default() -> Self {
        Self { k: 10, bridge: false }
    }
}

pub fn isomap(x: &Matrix, params: IsomapParams, dims: usize) -> Result<Matrix> {
    let mut graph = knn_graph_from_points(x, params.k, Metric::L2)?;
    if params.bridge {
        graph.bridge_components(|i, j| Metric::L2.distance(x.row(i), x.row(j)));
    }
    let geo = geodesic_distances(&graph)?;
    classical_mds(&geo, dims)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_switch_iter: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 500,
            learning_rate: 200.0,
            seed: 0,
            early_exaggeration: 4.0,
            exaggeration_iters: 50,
            momentum_switch_iter: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
        }
    }
}

/// Output of `tsne_traced`: coordinates plus the KL objective per iteration.
#[derive(Debug, Clone)]
pub struct TsneRun {
    pub coords: Matrix,
    pub kl_trace: Vec<f64>,
}

/// Conditional Gaussian affinities p_{j|i} calibrated to the perplexity.
/// Row i sums to 1.
pub fn conditional_affinities(x: &Matrix, perplexity: f64) -> Result<Vec<f64>> {
    let n = x.rows();
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut dist = vec![0.0; n];
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..n {
            dist[j] = if i == j {
                0.0
            } else {
                xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum()
            };
        }
        let row = &mut p[i * n..(i + 1) * n];
        let mut beta = 1.0;
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        // Shift by the smallest distance so the exponentials cannot all underflow.
        let dmin = dist
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(f64::INFINITY, |m, (_, &v)| m.min(v));
        let mut converged = false;
        for _ in 0..50 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j == i {
                    row[j] = 0.0;
                    continue;
                }
                let shifted = dist[j] - dmin;
                let v = (-beta * shifted).exp();
                row[j] = v;
                sum += v;
                weighted += shifted * v;
            }
            let entropy = sum.ln() + beta * weighted / sum;
            let diff = entropy - target;
            if diff.abs() < 1e-5 {
                converged = true;
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        if !converged {
            return Err(CoreError::Calibration { point: i });
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(p)
}

/// Joint affinities P = (P_cond + P_condᵀ) / 2n, summing to one.
pub fn joint_affinities(x: &Matrix, perplexity: f64) -> Result<Vec<f64>> {
    let n = x.rows();
    let cond = conditional_affinities(x, perplexity)?;
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
        }
    }
    Ok(p)
}

pub fn tsne(x: &Matrix, params: &TsneParams) -> Result<Matrix> {
    tsne_impl(x, params, false).map(|r| r.coords)
}

/// Like `tsne`, additionally recording the KL divergence (against the
/// un-exaggerated P) evaluated at the start of every iteration.
pub fn tsne_traced(x: &Matrix, params: &TsneParams) -> Result<TsneRun> {
    tsne_impl(x, params, true)
}

fn tsne_impl(x: &Matrix, params: &TsneParams, trace: bool) -> Result<TsneRun> {
    let n = x.rows();
    if !(params.perplexity > 1.0 && params.perplexity < n as f64 / 3.0) {
        return Err(CoreError::InvalidParameter(format!(
            "perplexity {} must lie in (1, n/3) for n = {n}",
            params.perplexity
        )));
    }
    if params.iterations == 0 {
        return Err(CoreError::InvalidParameter("t-SNE needs at least one iteration".into()));
    }
    let p = joint_affinities(x, params.perplexity)?;
    let p_log_p: f64 = if trace {
        p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum()
    } else {
        0.0
    };

    let mut rng = seeded_rng(params.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [1e-2 * gaussian(&mut rng), 1e-2 * gaussian(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut attr = vec![[0.0f64; 2]; n];
    let mut rep = vec![[0.0f64; 2]; n];
    let mut kl_trace = Vec::new();

    for iter in 0..params.iterations {
        let exaggeration = if iter < params.exaggeration_iters {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < params.momentum_switch_iter {
            params.initial_momentum
        } else {
            params.final_momentum
        };
        attr.iter_mut().for_each(|a| *a = [0.0; 2]);
        rep.iter_mut().for_each(|a| *a = [0.0; 2]);
        let mut z = 0.0;
        let mut p_log_num = 0.0;
        for i in 0..n {
            let yi = y[i];
            let prow = &p[i * n..(i + 1) * n];
            let (mut ai0, mut ai1, mut ri0, mut ri1) = (0.0, 0.0, 0.0, 0.0);
            for j in (i + 1)..n {
                let dx = yi[0] - y[j][0];
                let dy = yi[1] - y[j][1];
                let num = 1.0 / (1.0 + dx * dx + dy * dy);
                z += 2.0 * num;
                let pij = prow[j];
                let a = pij * num;
                let r = num * num;
                ai0 += a * dx;
                ai1 += a * dy;
                ri0 += r * dx;
                ri1 += r * dy;
                attr[j][0] -= a * dx;
                attr[j][1] -= a * dy;
                rep[j][0] -= r * dx;
                rep[j][1] -= r * dy;
                if trace && pij > 0.0 {
                    p_log_num += 2.0 * pij * num.ln();
                }
            }
            attr[i][0] += ai0;
            attr[i][1] += ai1;
            rep[i][0] += ri0;
            rep[i][1] += ri1;
        }
        if trace {
            kl_trace.push(p_log_p - p_log_num + z.ln());
        }
        if !z.is_finite() || z <= 0.0 {
            return Err(CoreError::Divergence { iteration: iter });
        }
        for i in 0..n {
            for c in 0..2 {
                let grad = 4.0 * (exaggeration * attr[i][c] - rep[i][c] / z);
                let same_sign = (grad > 0.0) == (velocity[i][c] > 0.0);
                gains[i][c] = if same_sign {
                    (gains[i][c] * 0.8).max(0.01)
                } else {
                    gains[i][c] + 0.2
                };
                velocity[i][c] = momentum * velocity[i][c] - params.learning_rate * gains[i][c] * grad;
                y[i][c] += velocity[i][c];
            }
        }
        let (mut m0, mut m1) = (0.0, 0.0);
        for yi in &y {
            m0 += yi[0];
            m1 += yi[1];
        }
        m0 /= n as f64;
        m1 /= n as f64;
        for yi in &mut y {
            yi[0] -= m0;
            yi[1] -= m1;
        }
        if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(CoreError::Divergence { iteration: iter });
        }
    }
    let coords = Matrix::from_vec(n, 2, y.iter().flat_map(|v| [v[0], v[1]]).collect())?;
    Ok(TsneRun { coords, kl_trace })
}

/// Reduction method used to produce a 2-D view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum DrMethod {
    Pca,
    Isomap(IsomapParams),
    Tsne(TsneParams),
}

impl DrMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DrMethod::Pca => "pca",
            DrMethod::Isomap(_) => "isomap",
            DrMethod::Tsne(_) => "tsne",
        }
    }

    fn params(&self) -> Vec<(String, f64)> {
        match self {
            DrMethod::Pca => vec![("d".into(), 2.0)],
            DrMethod::Isomap(p) => vec![
                ("k".into(), p.k as f64),
                ("d".into(), 2.0),
                ("bridge".into(), if p.bridge { 1.0 } else { 0.0 }),
            ],
            DrMethod::Tsne(p) => vec![
                ("perplexity".into(), p.perplexity),
                ("iterations".into(), p.iterations as f64),
                ("learning_rate".into(), p.learning_rate),
                ("seed".into(), p.seed as f64),
            ],
        }
    }

    /// Reduces `x` (rows are the samples listed in `subset`) to a 2-D view.
    pub fn reduce(&self, x: &Matrix, subset: Vec<usize>) -> Result<Embedding> {
        if x.rows() != subset.len() {
            return Err(CoreError::LengthMismatch {
                left: x.rows(),
                right: subset.len(),
            });
        }
        let coords = match self {
            DrMethod::Pca => {
                if x.cols() >= 2 {
                    pca_project(x, 2)?.1
                } else {
                    // One feature: the view is that coordinate plus a zero axis.
                    let (_, p) = pca_project(x, 1)?;
                    let mut m = Matrix::zeros(x.rows(), 2);
                    for i in 0..x.rows() {
                        m[(i, 0)] = p[(i, 0)];
                    }
                    m
                }
            }
            DrMethod::Isomap(p) => isomap(x, *p, 2)?,
            DrMethod::Tsne(p) => tsne(x, p)?,
        };
        Embedding::new(
            coords,
            LineageStep {
                method: self.name().into(),
                params: self.params(),
                subset,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::pairwise_distances;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    /// Orthogonal Procrustes residual: best rotation/reflection of `a` onto `b`
    /// (both centered, 2 columns) via the closed-form 2-D solution.
    pub(crate) fn procrustes_max_residual(a: &Matrix, b: &Matrix) -> f64 {
        let a = a.centered();
        let b = b.centered();
        let mut best = f64::INFINITY;
        for reflect in [1.0, -1.0] {
            let (mut s_cos, mut s_sin) = (0.0, 0.0);
            for i in 0..a.rows() {
                let (ax, ay) = (a[(i, 0)], reflect * a[(i, 1)]);
                let (bx, by) = (b[(i, 0)], b[(i, 1)]);
                s_cos += ax * bx + ay * by;
                s_sin += ax * by - ay * bx;
            }
            let theta = s_sin.atan2(s_cos);
            let (c, s) = (theta.cos(), theta.sin());
            let mut worst = 0.0f64;
            for i in 0..a.rows() {
                let (ax, ay) = (a[(i, 0)], reflect * a[(i, 1)]);
                let rx = c * ax - s * ay;
                let ry = s * ax + c * ay;
                worst = worst.max((rx - b[(i, 0)]).abs()).max((ry - b[(i, 1)]).abs());
            }
            best = best.min(worst);
        }
        best
    }

    #[test]
    fn pca_rank_one_captures_all_variance() {
        let rows: Vec<Vec<f64>> = (0..8).map(|t| {
            let t = t as f64;
            vec![1.0 + 2.0 * t, -1.0 + t, 0.5 * t]
        }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let (_, proj) = pca_project(&x, 1).unwrap();
        let total: f64 = (0..3).map(|c| covariance_matrix(&x).unwrap()[(c, c)]).sum();
        let var = covariance_matrix(&proj).unwrap()[(0, 0)];
        assert!((var - total).abs() < 1e-9 * total);
    }

    #[test]
    fn pca_full_basis_preserves_distances() {
        let x = random_matrix(12, 4, 1);
        let (basis, proj) = pca_project(&x, 4).unwrap();
        let btb = basis.transpose().matmul(&basis).unwrap();
        assert!(btb.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-10);
        let d1 = pairwise_distances(&x).unwrap();
        let d2 = pairwise_distances(&proj).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!((d1.get(i, j) - d2.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn pca_dimension_error() {
        let x = random_matrix(5, 2, 1);
        assert!(matches!(pca_project(&x, 3), Err(CoreError::InvalidDimension { .. })));
        assert!(matches!(pca_project(&x, 0), Err(CoreError::InvalidDimension { .. })));
    }

    #[test]
    fn mds_recovers_planar_points() {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.3, 2.0],
            vec![-1.5, 0.7],
        ])
        .unwrap();
        let d = pairwise_distances(&x).unwrap();
        let y = classical_mds(&d, 2).unwrap();
        assert!(procrustes_max_residual(&y, &x) < 1e-6);
    }

    #[test]
    fn mds_two_points() {
        let m = Matrix::from_rows(&[vec![0.0, 6.0], vec![6.0, 0.0]]).unwrap();
        let y = classical_mds(&DistanceMatrix::from_matrix(&m).unwrap(), 1).unwrap();
        assert!((y[(0, 0)].abs() - 3.0).abs() < 1e-12);
        assert!((y[(0, 0)] + y[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn mds_all_zero_is_degenerate() {
        let m = Matrix::zeros(3, 3);
        let err = classical_mds(&DistanceMatrix::from_matrix(&m).unwrap(), 2).unwrap_err();
        assert!(matches!(err, CoreError::DegenerateEmbedding(_)));
    }

    #[test]
    fn mds_large_path_uses_lanczos() {
        let x = random_matrix(350, 2, 4);
        let d = pairwise_distances(&x).unwrap();
        let y = classical_mds(&d, 2).unwrap();
        assert!(procrustes_max_residual(&y, &x) < 1e-6);
    }

    #[test]
    fn isomap_on_planar_points_is_near_isometric() {
        let x = random_matrix(40, 2, 8);
        let y = isomap(&x, IsomapParams { k: 39, bridge: false }, 2).unwrap();
        assert!(procrustes_max_residual(&y, &x) < 1e-6);
    }

    #[test]
    fn isomap_disconnected_reports_components() {
        let mut rows = Vec::new();
        for i in 0..5 {
            rows.push(vec![i as f64 * 0.1, 0.0]);
            rows.push(vec![100.0 + i as f64 * 0.1, 0.0]);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let err = isomap(&x, IsomapParams { k: 2, bridge: false }, 2).unwrap_err();
        assert_eq!(err, CoreError::Disconnected { components: 2 });
        assert!(isomap(&x, IsomapParams { k: 2, bridge: true }, 2).is_ok());
    }

    #[test]
    fn affinity_rows_normalized() {
        let x = random_matrix(40, 3, 2);
        let cond = conditional_affinities(&x, 5.0).unwrap();
        for i in 0..40 {
            let s: f64 = cond[i * 40..(i + 1) * 40].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let joint = joint_affinities(&x, 5.0).unwrap();
        let total: f64 = joint.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(joint[i * 40 + j], joint[j * 40 + i]);
            }
        }
    }

    #[test]
    fn tsne_rejects_bad_perplexity() {
        let x = random_matrix(9, 2, 2);
        let p = TsneParams { perplexity: 5.0, ..Default::default() };
        assert!(matches!(tsne(&x, &p), Err(CoreError::InvalidParameter(_))));
    }

    #[test]
    fn tsne_is_seed_deterministic() {
        let x = random_matrix(30, 3, 3);
        let p = TsneParams { perplexity: 5.0, iterations: 100, seed: 7, ..Default::default() };
        let a = tsne(&x, &p).unwrap();
        let b = tsne(&x, &p).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = tsne(&x, &TsneParams { seed: 8, ..p }).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn tsne_objective_settles() {
        // Three overlapping clusters.
        for seed in 0..2u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(21 + seed);
            let mut rows = Vec::new();
            for c in 0..3 {
                for _ in 0..40 {
                    rows.push(vec![
                        2.0 * c as f64 + rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ]);
                }
            }
            let x = Matrix::from_rows(&rows).unwrap();
            let p = TsneParams { perplexity: 10.0, seed, ..Default::default() };
            let run = tsne_traced(&x, &p).unwrap();
            assert_eq!(run.kl_trace.len(), 500);
            for w in run.kl_trace[450..].windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "KL rose: {} -> {}", w[0], w[1]);
            }
            assert!(run.kl_trace[499] < run.kl_trace[60]);
        }
    }

    #[test]
    fn reduce_records_lineage() {
        let x = random_matrix(10, 3, 5);
        let e = DrMethod::Pca.reduce(&x, (100..110).collect()).unwrap();
        assert_eq!(e.coords.rows(), 10);
        assert_eq!(e.scope(), &(100..110).collect::<Vec<_>>()[..]);
        assert_eq!(e.lineage[0].method, "pca");
    }
}
