use nalgebra::{DMatrix, DVector};

use super::ScoreFn;
use crate::error::{EcotError, Result};

/// Column means and standard deviations over both classes, accumulated in
/// canonical row order.
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(c0: &[&[f64]], c1: &[&[f64]]) -> Self {
        let d = c0[0].len();
        let n = (c0.len() + c1.len()) as f64;
        let mut mean = vec![0.0; d];
        for r in c0.iter().chain(c1) {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in c0.iter().chain(c1) {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression. The score is the fitted log-odds of class-1
/// membership, which ranks exactly like the probability but does not
/// saturate to ties at 1.0.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    weights: Vec<f64>,
    intercept: f64,
}

impl LogisticModel {
    /// Full-batch gradient descent on the mean log-loss plus `l2/2·‖w‖²`
    /// (standardized scale). Step size is `1/L` with `L` the trace bound on
    /// the loss curvature. Rows must already be in canonical order.
    pub fn fit(c0: &[&[f64]], c1: &[&[f64]], l2: f64, iterations: usize) -> Self {
        let std = Standardizer::fit(c0, c1);
        let z0: Vec<Vec<f64>> = c0.iter().map(|r| std.apply(r)).collect();
        let z1: Vec<Vec<f64>> = c1.iter().map(|r| std.apply(r)).collect();
        let d = std.mean.len();
        let n = (z0.len() + z1.len()) as f64;
        let mean_sq = z0.iter().chain(&z1).map(|r| r.iter().map(|x| x * x).sum::<f64>() + 1.0).sum::<f64>() / n;
        let step = 1.0 / (0.25 * mean_sq + l2);

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut gw = vec![0.0; d];
        for _ in 0..iterations {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (rows, y) in [(&z0, 0.0), (&z1, 1.0)] {
                for r in rows.iter() {
                    let z = b + r.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>();
                    let e = sigmoid(z) - y;
                    for (g, x) in gw.iter_mut().zip(r) {
                        *g += e * x;
                    }
                    gb += e;
                }
            }
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= step * (g / n + l2 * *wi);
            }
            b -= step * gb / n;
        }
        // fold the standardization back into feature space
        let weights: Vec<f64> = w.iter().zip(&std.scale).map(|(w, s)| w / s).collect();
        let intercept = b - weights.iter().zip(&std.mean).map(|(w, m)| w * m).sum::<f64>();
        Self { weights, intercept }
    }

    pub fn log_odds(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }
}

impl ScoreFn for LogisticModel {
    fn score(&self, x: &[f64]) -> f64 {
        self.log_odds(x)
    }
    fn linear_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }
}

/// Gaussian LDA with shared covariance; the score is the discriminant log-odds.
#[derive(Debug, Clone)]
pub struct LdaModel {
    weights: Vec<f64>,
    intercept: f64,
}

impl LdaModel {
    /// `w = (Σ + ridge·tr(Σ)/d·I)⁻¹ (μ1 − μ0)`. Rows must be in canonical order.
    pub fn fit(c0: &[&[f64]], c1: &[&[f64]], ridge: f64) -> Result<Self> {
        let d = c0[0].len();
        let mean = |rows: &[&[f64]]| {
            let mut m = vec![0.0; d];
            for r in rows {
                for (a, x) in m.iter_mut().zip(r.iter()) {
                    *a += x;
                }
            }
            m.iter_mut().for_each(|a| *a /= rows.len() as f64);
            m
        };
        let mu0 = mean(c0);
        let mu1 = mean(c1);
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for (rows, mu) in [(c0, &mu0), (c1, &mu1)] {
            for r in rows {
                let centered = DVector::from_iterator(d, r.iter().zip(mu.iter()).map(|(x, m)| x - m));
                cov += &centered * centered.transpose();
            }
        }
        let dof = (c0.len() + c1.len()).saturating_sub(2).max(1) as f64;
        cov /= dof;
        let shrink = ridge * (cov.trace() / d as f64).max(f64::MIN_POSITIVE);
        for i in 0..d {
            cov[(i, i)] += shrink;
        }
        let diff = DVector::from_iterator(d, mu1.iter().zip(&mu0).map(|(a, b)| a - b));
        let chol = cov
            .cholesky()
            .ok_or_else(|| EcotError::Parameter("pooled covariance is not positive definite".into()))?;
        let w = chol.solve(&diff);
        let weights: Vec<f64> = w.iter().copied().collect();
        let midpoint: f64 =
            weights.iter().zip(mu0.iter().zip(&mu1)).map(|(w, (a, b))| w * (a + b) / 2.0).sum();
        let prior = (c1.len() as f64 / c0.len() as f64).ln();
        Ok(Self { weights, intercept: prior - midpoint })
    }
}

impl ScoreFn for LdaModel {
    fn score(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }
    fn linear_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }
}
