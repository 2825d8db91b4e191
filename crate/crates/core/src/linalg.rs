// SPDX-License-Identifier: Apache-2.0

//! Covariance and symmetric eigendecomposition.
//!
//! The dense solver reduces to tridiagonal form with Householder reflections
//! and then runs implicit-shift QL iterations. `top_eigenpairs` is a
//! Lanczos variant with full reorthogonalization for large dense operators
//! where only a handful of leading eigenpairs are needed (classical MDS).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymEigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SymEigenResult {
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.col(k)
    }

    /// V·diag(λ)·Vᵀ
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvectors.rows();
        let m = self.eigenvalues.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..m {
                    s += self.eigenvectors[(i, k)] * self.eigenvalues[k] * self.eigenvectors[(j, k)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }
}

/// Sample covariance of the rows of `x` (samples × features), normalized by n−1.
pub fn covariance_matrix(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    if n < 2 {
        return Err(CoreError::DegenerateInput(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let d = x.cols();
    let centered = x.centered();
    let mut cov = Matrix::zeros(d, d);
    for row in centered.iter_rows() {
        for a in 0..d {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ra * row[b];
            }
        }
    }
    let scale = 1.0 / (n as f64 - 1.0);
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] * scale;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(CoreError::ContractViolation(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.all_finite() {
        return Err(CoreError::ContractViolation("matrix has non-finite entries".into()));
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-9 * scale {
                return Err(CoreError::ContractViolation(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eigendecompose(a: &Matrix) -> Result<SymEigenResult> {
    check_symmetric(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(SymEigenResult {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    // Work on the exactly symmetrized copy.
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            v[i][j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok(sorted_result(&v, &d))
}

fn sorted_result(v: &[Vec<f64>], d: &[f64]) -> SymEigenResult {
    let n = d.len();
    let rows = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let mut vectors = Matrix::zeros(rows, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        // Sign convention: largest-magnitude component positive.
        let mut pivot = 0.0f64;
        for row in v.iter().take(rows) {
            if row[old_col].abs() > pivot.abs() + 1e-14 {
                pivot = row[old_col];
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (r, row) in v.iter().enumerate().take(rows) {
            vectors[(r, new_col)] = sign * row[old_col];
        }
    }
    SymEigenResult {
        eigenvalues: order.iter().map(|&i| d[i]).collect(),
        eigenvectors: vectors,
    }
}

/// Householder reduction to tridiagonal form. On return `d` holds the
/// diagonal, `e[1..]` the subdiagonal and `v` the accumulated transform.
fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal (d, e), accumulating into `v`.
fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    let rows = v.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(CoreError::DegenerateInput(
                        "QL iteration failed to converge".into(),
                    ));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut().take(rows) {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Leading `count` eigenpairs (largest algebraic eigenvalues) of a symmetric
/// operator given only through `matvec`, via Lanczos with full
/// reorthogonalization. Deterministic: the start vector is fixed.
pub fn top_eigenpairs<F>(n: usize, count: usize, tol: f64, mut matvec: F) -> Result<SymEigenResult>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if count == 0 || count > n {
        return Err(CoreError::InvalidDimension {
            requested: count,
            available: n,
        });
    }
    let mut steps = (4 * count + 40).min(n);
    loop {
        let (values, vectors, converged) = lanczos_pass(n, count, steps, tol, &mut matvec)?;
        if converged || steps == n {
            let mut m = Matrix::zeros(n, count);
            for (k, vec) in vectors.iter().enumerate() {
                for i in 0..n {
                    m[(i, k)] = vec[i];
                }
            }
            return Ok(SymEigenResult {
                eigenvalues: values,
                eigenvectors: m,
            });
        }
        steps = (steps * 2).min(n);
    }
}

type LanczosOutput = (Vec<f64>, Vec<Vec<f64>>, bool);

fn lanczos_pass<F>(n: usize, count: usize, steps: usize, tol: f64, matvec: &mut F) -> Result<LanczosOutput>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha: Vec<f64> = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);

    // Fixed, non-symmetric start vector so no eigenvector is orthogonal to it by symmetry.
    let mut q: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    normalize(&mut q);
    let mut w = vec![0.0; n];
    let mut op_norm = 0.0f64;

    for j in 0..steps {
        matvec(&q, &mut w);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q.clone());
        // Full reorthogonalization (twice for stability).
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let bnorm = norm(&w);
        op_norm = op_norm.max(a.abs() + bnorm);
        if j + 1 == steps {
            beta.push(bnorm);
            break;
        }
        if bnorm <= 1e-12 * op_norm.max(1e-300) {
            // Invariant subspace found: restart direction orthogonal to the basis.
            let mut fresh: Vec<f64> = (0..n)
                .map(|i| ((i as f64 + 3.0 + j as f64) * 0.754_877_666_246_692_7).fract() - 0.5)
                .collect();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&fresh, b);
                    axpy(-c, b, &mut fresh);
                }
            }
            if norm(&fresh) < 1e-10 {
                beta.push(0.0);
                break;
            }
            normalize(&mut fresh);
            beta.push(0.0);
            q = fresh;
        } else {
            beta.push(bnorm);
            q = w.iter().map(|v| v / bnorm).collect();
        }
    }

    let m = alpha.len();
    let mut t = Matrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = sym_eigendecompose(&t)?;
    let take = count.min(m);
    let last_beta = *beta.last().unwrap_or(&0.0);
    let mut converged = take == count;
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for k in 0..take {
        let residual = (last_beta * eig.eigenvectors[(m - 1, k)]).abs();
        if residual > tol * op_norm.max(1e-300) {
            converged = false;
        }
        let mut ritz = vec![0.0; n];
        for (i, b) in basis.iter().enumerate() {
            axpy(eig.eigenvectors[(i, k)], b, &mut ritz);
        }
        normalize(&mut ritz);
        let pivot = ritz.iter().fold(0.0f64, |p, &v| if v.abs() > p.abs() + 1e-14 { v } else { p });
        if pivot < 0.0 {
            ritz.iter_mut().for_each(|v| *v = -*v);
        }
        values.push(eig.eigenvalues[k]);
        vectors.push(ritz);
    }
    Ok((values, vectors, converged))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let nrm = norm(a);
    if nrm > 0.0 {
        a.iter_mut().for_each(|v| *v /= nrm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    /// Direct double-loop oracle for the covariance.
    fn covariance_oracle(x: &Matrix) -> Matrix {
        let n = x.rows();
        let d = x.cols();
        let mut mu = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                mu[j] += x[(i, j)] / n as f64;
            }
        }
        let mut c = Matrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut s = 0.0;
                for i in 0..n {
                    s += (x[(i, a)] - mu[a]) * (x[(i, b)] - mu[b]);
                }
                c[(a, b)] = s / (n as f64 - 1.0);
            }
        }
        c
    }

    #[test]
    fn covariance_of_duplicate_points_is_zero() {
        let x = Matrix::from_rows(&[vec![1.5, -2.0], vec![1.5, -2.0]]).unwrap();
        let c = covariance_matrix(&x).unwrap();
        assert!(c.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn covariance_two_points() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let c = covariance_matrix(&x).unwrap();
        assert_eq!(c.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn covariance_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..15).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let x = Matrix::from_vec(5, 3, data).unwrap();
        let c = covariance_matrix(&x).unwrap();
        let o = covariance_oracle(&x);
        assert!(c.sub(&o).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn covariance_needs_two_samples() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(covariance_matrix(&x), Err(CoreError::DegenerateInput(_))));
    }

    #[test]
    fn identity_eigenvalues() {
        let r = sym_eigendecompose(&Matrix::identity(3)).unwrap();
        for v in &r.eigenvalues {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_axis_aligned() {
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = sym_eigendecompose(&a).unwrap();
        assert!((r.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!((r.eigenvectors[(0, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((r.eigenvectors[(1, 1)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        let a = random_symmetric(6, 11);
        let r = sym_eigendecompose(&a).unwrap();
        let resid = a.sub(&r.reconstruct()).unwrap().frobenius_norm();
        assert!(resid <= 1e-8 * a.frobenius_norm(), "residual {resid}");
        for w in r.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(sym_eigendecompose(&rect), Err(CoreError::ContractViolation(_))));
        let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigendecompose(&asym), Err(CoreError::ContractViolation(_))));
    }

    #[test]
    fn lanczos_matches_dense() {
        let a = random_symmetric(60, 3);
        let dense = sym_eigendecompose(&a).unwrap();
        let top = top_eigenpairs(60, 3, 1e-10, |x, y| {
            for i in 0..60 {
                y[i] = dot(a.row(i), x);
            }
        })
        .unwrap();
        for k in 0..3 {
            assert!((top.eigenvalues[k] - dense.eigenvalues[k]).abs() < 1e-8);
            let v1 = top.eigenvector(k);
            let v2 = dense.eigenvector(k);
            assert!((dot(&v1, &v2).abs() - 1.0).abs() < 1e-6);
        }
    }
}
