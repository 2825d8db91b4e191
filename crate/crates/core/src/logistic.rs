// SPDX-License-Identifier: Apache-2.0

//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            epochs: 300,
            lr: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// p×d weights applied to mean-centered features.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub feature_means: Vec<f64>,
    /// Training loss after every epoch.
    pub loss_trace: Vec<f64>,
}

/// Flat parameter vector: p·d weights followed by p biases.
struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    p: usize,
    l2: f64,
}

impl Problem<'_> {
    fn d(&self) -> usize {
        self.x.cols()
    }

    /// Mean cross-entropy plus (l2/2)·‖W‖², and its gradient when requested.
    fn evaluate(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (n, d, p) = (self.x.rows(), self.d(), self.p);
        let (w, b) = theta.split_at(p * d);
        let mut loss = 0.0;
        let mut logits = vec![0.0; p];
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..n {
            let xi = self.x.row(i);
            for c in 0..p {
                let wc = &w[c * d..(c + 1) * d];
                logits[c] = b[c] + wc.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            let log_z = m + z.ln();
            loss += log_z - logits[self.y[i]];
            if let Some(g) = g.as_deref_mut() {
                for c in 0..p {
                    let prob = (logits[c] - log_z).exp();
                    let delta = (prob - if c == self.y[i] { 1.0 } else { 0.0 }) / n as f64;
                    if delta == 0.0 {
                        continue;
                    }
                    for (gv, &xv) in g[c * d..(c + 1) * d].iter_mut().zip(xi) {
                        *gv += delta * xv;
                    }
                    g[p * d + c] += delta;
                }
            }
        }
        loss /= n as f64;
        loss += 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = g {
            for (gv, wv) in g[..p * d].iter_mut().zip(w) {
                *gv += self.l2 * wv;
            }
        }
        loss
    }
}

fn centered(x: &Matrix, means: &[f64]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, m) in out.row_mut(i).iter_mut().zip(means) {
            *v -= m;
        }
    }
    out
}

/// Trains a softmax classifier. An epoch whose step would raise the loss is
/// retried with the step halved; the step size stays halved afterwards.
pub fn train_logistic(x: &Matrix, labels: &[usize], params: &LogisticParams) -> Result<LogisticModel> {
    if x.rows() != labels.len() {
        return Err(CoreError::LengthMismatch {
            left: x.rows(),
            right: labels.len(),
        });
    }
    let p = labels.iter().copied().max().map_or(0, |m| m + 1);
    let distinct = {
        let mut seen = vec![false; p];
        labels.iter().for_each(|&c| seen[c] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(CoreError::SingleClass);
    }
    if !(params.lr > 0.0) || params.l2 < 0.0 {
        return Err(CoreError::InvalidParameter("lr must be positive and l2 nonnegative".into()));
    }
    let means = x.column_means();
    let xc = centered(x, &means);
    let d = x.cols();
    let problem = Problem {
        x: &xc,
        y: labels,
        p,
        l2: params.l2,
    };
    let mut rng = seeded_rng(params.seed);
    let mut theta: Vec<f64> = (0..p * d).map(|_| 1e-3 * gaussian(&mut rng)).collect();
    theta.extend(std::iter::repeat(0.0).take(p));
    let mut grad = vec![0.0; theta.len()];
    let mut loss = problem.evaluate(&theta, Some(&mut grad));
    let mut lr = params.lr;
    let mut trace = Vec::with_capacity(params.epochs);
    let mut candidate = vec![0.0; theta.len()];
    let mut cand_grad = vec![0.0; theta.len()];
    for _ in 0..params.epochs {
        let mut accepted = false;
        for _ in 0..40 {
            for ((c, t), g) in candidate.iter_mut().zip(&theta).zip(&grad) {
                *c = t - lr * g;
            }
            let cand_loss = problem.evaluate(&candidate, Some(&mut cand_grad));
            if cand_loss <= loss {
                std::mem::swap(&mut theta, &mut candidate);
                std::mem::swap(&mut grad, &mut cand_grad);
                loss = cand_loss;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        trace.push(loss);
        if !accepted {
            break;
        }
    }
    let bias = theta.split_off(p * d);
    Ok(LogisticModel {
        weights: Matrix::from_vec(p, d, theta)?,
        bias,
        feature_means: means,
        loss_trace: trace,
    })
}

impl LogisticModel {
    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn classify(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.weights.cols() {
            return Err(CoreError::LengthMismatch {
                left: x.cols(),
                right: self.weights.cols(),
            });
        }
        let p = self.num_classes();
        Ok((0..x.rows())
            .map(|i| {
                let xi = x.row(i);
                let mut best = (0, f64::NEG_INFINITY);
                for c in 0..p {
                    let s = self.bias[c]
                        + self
                            .weights
                            .row(c)
                            .iter()
                            .zip(xi.iter().zip(&self.feature_means))
                            .map(|(w, (v, m))| w * (v - m))
                            .sum::<f64>();
                    if s > best.1 {
                        best = (c, s);
                    }
                }
                best.0
            })
            .collect())
    }
}

/// Loss and analytic gradient at a flat parameter vector, on centered data.
#[doc(hidden)]
pub fn loss_and_gradient(x: &Matrix, labels: &[usize], classes: usize, l2: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let problem = Problem {
        x,
        y: labels,
        p: classes,
        l2,
    };
    let mut g = vec![0.0; theta.len()];
    let loss = problem.evaluate(theta, Some(&mut g));
    (loss, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::accuracy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            rows.push(vec![t, 1.0 + t]);
            y.push(0);
            rows.push(vec![t + 3.0, t - 1.0]);
            y.push(1);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_toy() {
        let (x, y) = toy();
        let m = train_logistic(&x, &y, &LogisticParams::default()).unwrap();
        assert_eq!(accuracy(&m.classify(&x).unwrap(), &y).unwrap(), 1.0);
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Matrix::from_vec(5, 3, (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y = vec![0, 2, 1, 2, 0];
        let theta: Vec<f64> = (0..12).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (_, g) = loss_and_gradient(&x, &y, 3, 0.1, &theta);
        let h = 1e-5;
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (loss_and_gradient(&x, &y, 3, 0.1, &tp).0 - loss_and_gradient(&x, &y, 3, 0.1, &tm).0) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "k={k} fd={fd} g={}", g[k]);
        }
    }

    #[test]
    fn offset_invariance() {
        let (x, y) = toy();
        let mut shifted = x.clone();
        shifted.as_mut_slice().iter_mut().for_each(|v| *v += 17.5);
        let params = LogisticParams { epochs: 50, ..Default::default() };
        let a = train_logistic(&x, &y, &params).unwrap();
        let b = train_logistic(&shifted, &y, &params).unwrap();
        assert_eq!(a.classify(&x).unwrap(), b.classify(&shifted).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::zeros(3, 2);
        assert_eq!(train_logistic(&x, &[1, 1, 1], &LogisticParams::default()).unwrap_err(), CoreError::SingleClass);
    }

    #[test]
    fn deterministic() {
        let (x, y) = toy();
        let p = LogisticParams { epochs: 20, seed: 4, ..Default::default() };
        assert_eq!(train_logistic(&x, &y, &p).unwrap(), train_logistic(&x, &y, &p).unwrap());
    }
}
