use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::policies::{RandomizedTiePolicy, ScreeningPolicy};
use crate::types::{CalibrationSet, Pool};

use super::{rule_or_select_all, RuleOutcome};

/// `s -> sigmoid(a s + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattModel {
    slope: f64,
    intercept: f64,
    degenerate: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

impl PlattModel {
    pub fn new(slope: f64, intercept: f64) -> Result<Self> {
        if !(slope.is_finite() && intercept.is_finite()) {
            return Err(Error::BadParams("Platt parameters must be finite"));
        }
        Ok(PlattModel { slope, intercept, degenerate: false })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Set when the data cannot identify a slope (all scores equal or all
    /// labels equal); the model is then the constant smoothed rate.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn predict(&self, score: f64) -> f64 {
        sigmoid(self.slope * score + self.intercept)
    }
}

/// Smoothed targets: `(N+ + 1)/(N+ + 2)` for positives and `1/(N- + 2)` for
/// negatives.
fn targets(cal: &CalibrationSet) -> (f64, f64) {
    let pos = cal.positives() as f64;
    let neg = (cal.len() - cal.positives()) as f64;
    ((pos + 1.0) / (pos + 2.0), 1.0 / (neg + 2.0))
}

/// Mean negative log-likelihood against the smoothed targets, and its
/// gradient and Hessian in `(a, b)`.
fn objective(data: &[(f64, f64)], a: f64, b: f64) -> (f64, [f64; 2], [f64; 3]) {
    let n = data.len() as f64;
    let mut f = 0.0;
    let mut g = [0.0; 2];
    let mut h = [0.0; 3];
    for &(s, t) in data {
        let z = a * s + b;
        let p = sigmoid(z);
        f += (softplus(z) - t * z) / n;
        let r = (p - t) / n;
        g[0] += r * s;
        g[1] += r;
        let w = p * (1.0 - p) / n;
        h[0] += w * s * s;
        h[1] += w * s;
        h[2] += w;
    }
    (f, g, h)
}

/// Gradient of the mean smoothed negative log-likelihood at `model`.
pub fn platt_gradient(cal: &CalibrationSet, model: &PlattModel) -> [f64; 2] {
    objective(&smoothed(cal), model.slope, model.intercept).1
}

fn smoothed(cal: &CalibrationSet) -> Vec<(f64, f64)> {
    let (tp, tn) = targets(cal);
    cal.examples().iter().map(|e| (e.score, if e.label { tp } else { tn })).collect()
}

/// Maximum-likelihood sigmoid fit by damped Newton iterations, stopping when
/// the gradient's largest component is below `1e-10` or after 100 steps.
pub fn platt_fit(cal: &CalibrationSet) -> Result<PlattModel> {
    if cal.len() < 2 {
        return Err(Error::InvalidN { n: cal.len(), min: 2 });
    }
    let data = smoothed(cal);
    let mean_target = data.iter().map(|d| d.1).sum::<f64>() / data.len() as f64;
    let logit = |p: f64| libm::log(p / (1.0 - p));
    let all_same_label = cal.positives() == 0 || cal.positives() == cal.len();
    if cal.max_score() == cal.min_score() || all_same_label {
        return Ok(PlattModel { slope: 0.0, intercept: logit(mean_target), degenerate: true });
    }

    let (mut a, mut b) = (0.0, logit(mean_target));
    let (mut f, mut g, mut h) = objective(&data, a, b);
    for _ in 0..100 {
        if g[0].abs().max(g[1].abs()) < 1e-10 {
            break;
        }
        let det = h[0] * h[2] - h[1] * h[1];
        let (da, db) = if det > 1e-300 {
            (-(h[2] * g[0] - h[1] * g[1]) / det, -(h[0] * g[1] - h[1] * g[0]) / det)
        } else {
            (-g[0], -g[1])
        };
        let slope = g[0] * da + g[1] * db;
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let next = objective(&data, na, nb);
            if next.0 <= f + 1e-4 * step * slope || step < 1e-12 {
                a = na;
                b = nb;
                (f, g, h) = next;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(PlattModel { slope: a, intercept: b, degenerate: false })
}

/// The omniscient rule on Platt-mapped scores, expressed over raw scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattPolicy {
    model: PlattModel,
    mapped: RandomizedTiePolicy,
}

impl PlattPolicy {
    pub fn model(&self) -> &PlattModel {
        &self.model
    }

    /// The rule in the mapped-score space.
    pub fn mapped_policy(&self) -> &RandomizedTiePolicy {
        &self.mapped
    }
}

impl ScreeningPolicy for PlattPolicy {
    fn selection_probability(&self, score: f64) -> f64 {
        self.mapped.selection_probability(self.model.predict(score))
    }
}

pub fn platt_rule(model: &PlattModel, pool: &Pool, k: f64) -> Result<RuleOutcome<PlattPolicy>> {
    let probs: Vec<f64> = pool.scores().iter().map(|&s| model.predict(s)).collect();
    let RuleOutcome { policy, feasible } = rule_or_select_all(&probs, k)?;
    Ok(RuleOutcome { policy: PlattPolicy { model: *model, mapped: policy }, feasible })
}
