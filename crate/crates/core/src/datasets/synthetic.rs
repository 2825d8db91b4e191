// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use super::{Dataset, Provenance};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian, seeded_rng};

/// Class means of the four-class dataset.
pub const FOUR_CLASS_MEANS: [[f64; 3]; 4] = [[5.0, 3.0, 1.0], [5.0, 3.0, 5.0], [50.0, 3.0, 2.0], [5.0, 50.0, 2.0]];

/// Shared class covariance of the four-class dataset.
pub const FOUR_CLASS_COVARIANCE: [[f64; 3]; 3] = [[0.3, 0.04, 0.06], [0.04, 0.2, 0.05], [0.06, 0.05, 0.2]];

fn provenance(name: &str, params: Vec<(String, f64)>, seed: u64) -> Provenance {
    Provenance::Generator {
        name: name.into(),
        params,
        seed,
    }
}

fn linspace(a: f64, b: f64, m: usize) -> impl Iterator<Item = f64> {
    let step = if m > 1 { (b - a) / (m - 1) as f64 } else { 0.0 };
    (0..m).map(move |i| a + step * i as f64)
}

/// Two interleaved unit half circles. Class 0 is the upper arc
/// (cos t, sin t); class 1 is the lower arc (1 − cos t, 0.5 − sin t).
/// Angles are evenly spaced, so larger n densifies a fixed geometry.
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(CoreError::InvalidParameter("two moons needs n >= 2".into()));
    }
    if !(noise >= 0.0) {
        return Err(CoreError::InvalidParameter("noise must be nonnegative".into()));
    }
    let n_upper = n.div_ceil(2);
    let n_lower = n - n_upper;
    let mut rng = seeded_rng(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut truth = Vec::with_capacity(n);
    for t in linspace(0.0, PI, n_upper) {
        data.push(t.cos());
        data.push(t.sin());
        truth.push(0);
    }
    for t in linspace(0.0, PI, n_lower) {
        data.push(1.0 - t.cos());
        data.push(0.5 - t.sin());
        truth.push(1);
    }
    if noise > 0.0 {
        for v in &mut data {
            *v += noise * gaussian(&mut rng);
        }
    }
    Dataset::new(
        "two_moons",
        Matrix::from_vec(n, 2, data)?,
        truth,
        provenance("two_moons", vec![("n".into(), n as f64), ("noise".into(), noise)], seed),
    )
}

/// Two unit-half-length segments crossing at the origin: class 0 along
/// y = x, class 1 along y = −x.
pub fn gen_x_shape(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(CoreError::InvalidParameter("x shape needs n >= 2".into()));
    }
    if !(noise >= 0.0) {
        return Err(CoreError::InvalidParameter("noise must be nonnegative".into()));
    }
    let n0 = n.div_ceil(2);
    let n1 = n - n0;
    let mut rng = seeded_rng(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut truth = Vec::with_capacity(n);
    for t in linspace(-1.0, 1.0, n0) {
        data.extend([t, t]);
        truth.push(0);
    }
    for t in linspace(-1.0, 1.0, n1) {
        data.extend([t, -t]);
        truth.push(1);
    }
    if noise > 0.0 {
        for v in &mut data {
            *v += noise * gaussian(&mut rng);
        }
    }
    Dataset::new(
        "x_shape",
        Matrix::from_vec(n, 2, data)?,
        truth,
        provenance("x_shape", vec![("n".into(), n as f64), ("noise".into(), noise)], seed),
    )
}

/// Lower Cholesky factor of `a` (3×3, positive definite).
fn cholesky3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Four 3-D Gaussians with the fixed means and shared covariance; classes
/// are stored in blocks of `n_per_class`.
pub fn gen_four_gaussians(n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(CoreError::InvalidParameter("n_per_class must be >= 1".into()));
    }
    let l = cholesky3(&FOUR_CLASS_COVARIANCE).expect("four-class covariance is positive definite");
    let mut rng = seeded_rng(seed);
    let n = 4 * n_per_class;
    let mut data = Vec::with_capacity(3 * n);
    let mut truth = Vec::with_capacity(n);
    for (class, mean) in FOUR_CLASS_MEANS.iter().enumerate() {
        for _ in 0..n_per_class {
            let z = [gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng)];
            for r in 0..3 {
                let mut v = mean[r];
                for c in 0..=r {
                    v += l[r][c] * z[c];
                }
                data.push(v);
            }
            truth.push(class);
        }
    }
    Dataset::new(
        "four_gaussians",
        Matrix::from_vec(n, 3, data)?,
        truth,
        provenance("four_gaussians", vec![("n_per_class".into(), n_per_class as f64)], seed),
    )
}

/// Builds a synthetic dataset by generator name. `n` is the total sample
/// count (for four_gaussians it must be a multiple of 4).
pub fn generate(name: &str, n: usize, noise: Option<f64>, seed: u64) -> Result<Dataset> {
    match name {
        "two_moons" => gen_two_moons(n, noise.unwrap_or(0.08), seed),
        "x_shape" => gen_x_shape(n, noise.unwrap_or(0.05), seed),
        "four_gaussians" => {
            if n % 4 != 0 {
                return Err(CoreError::InvalidParameter(format!(
                    "four_gaussians needs n divisible by 4, got {n}"
                )));
            }
            gen_four_gaussians(n / 4, seed)
        }
        other => Err(CoreError::InvalidParameter(format!("unknown generator '{other}'"))),
    }
}
