use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::Membership;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub features: Vec<f64>,
    pub label: bool,
    pub groups: Membership,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on the weights (the intercept is not penalized).
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.1, epochs: 500, l2: 1e-4 }
    }
}

/// Logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    intercept: f64,
    weights: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub fn from_parts(intercept: f64, weights: Vec<f64>, means: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        let d = weights.len();
        if means.len() != d || scales.len() != d {
            return Err(Error::LengthMismatch { expected: d, found: means.len().max(scales.len()) });
        }
        let all_finite = core::iter::once(&intercept).chain(&weights).chain(&means).all(|v| v.is_finite());
        if !all_finite || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::BadParams("model parameters must be finite with positive scales"));
        }
        Ok(LogisticModel { intercept, weights, means, scales })
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Weights on the standardized features.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { row: 0, expected: self.weights.len(), found: features.len() });
        }
        Ok(sigmoid(self.logit(features)))
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.intercept
            + x.iter()
                .zip(&self.weights)
                .zip(self.means.iter().zip(&self.scales))
                .map(|((v, w), (mu, sc))| w * (v - mu) / sc)
                .sum::<f64>()
    }
}

/// Full-batch gradient descent on the L2-regularized mean log-loss.
///
/// Deterministic given the row order.
pub fn train_logistic(rows: &[LabeledRow], cfg: &TrainConfig) -> Result<LogisticModel> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if rows.len() < 2 {
        return Err(Error::InvalidN { n: rows.len(), min: 2 });
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0 && cfg.l2.is_finite() && cfg.l2 >= 0.0) {
        return Err(Error::BadParams("learning rate must be positive and l2 non-negative"));
    }
    let d = rows[0].features.len();
    for (i, r) in rows.iter().enumerate() {
        if r.features.len() != d {
            return Err(Error::DimensionMismatch { row: i, expected: d, found: r.features.len() });
        }
        if r.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadParams("features must be finite"));
        }
    }
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for r in rows {
        for (m, v) in means.iter_mut().zip(&r.features) {
            *m += v / n;
        }
    }
    let mut scales = vec![0.0; d];
    for r in rows {
        for ((s, v), m) in scales.iter_mut().zip(&r.features).zip(&means) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for (j, s) in scales.iter_mut().enumerate() {
        let first = rows[0].features[j];
        let constant = rows.iter().all(|r| r.features[j] == first);
        *s = if constant || *s <= 0.0 { 1.0 } else { libm::sqrt(*s) };
    }
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.features.iter().zip(&means).zip(&scales).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    let mut b = 0.0;
    let mut w = vec![0.0; d];
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, r) in xs.iter().zip(rows) {
            let z = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let err = sigmoid(z) - f64::from(u8::from(r.label));
            grad_b += err / n;
            for (g, a) in grad.iter_mut().zip(x) {
                *g += err * a / n;
            }
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= cfg.learning_rate * (g + cfg.l2 * *wi);
        }
        b -= cfg.learning_rate * grad_b;
    }
    LogisticModel::from_parts(b, w, means, scales)
}
