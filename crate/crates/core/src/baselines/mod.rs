//! Baselines without a finite-sample guarantee.
//!
//! The uncalibrated rule treats raw scores as qualification probabilities and
//! applies the omniscient rule to each pool. Platt and isotonic baselines
//! first recalibrate the scores on the calibration data. None of them
//! accounts for estimation error, and when a rule has no solution it selects
//! the whole pool and is flagged, so experiment metrics stay defined.

mod isotonic;
mod platt;

use crate::bounds::DeltaCurve;
use crate::error::Result;
use crate::policies::{omniscient_rule, RandomizedTiePolicy, ScreeningPolicy};
use crate::types::{CalibrationSet, Pool};
use crate::Error;

pub use isotonic::{isotonic_fit, isotonic_rule, IsotonicModel, IsotonicVariant};
pub use platt::{platt_fit, platt_gradient, platt_rule, PlattModel, PlattPolicy};

/// A baseline policy and whether its rule had a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutcome<P> {
    pub policy: P,
    pub feasible: bool,
}

impl<P: ScreeningPolicy> ScreeningPolicy for RuleOutcome<P> {
    fn selection_probability(&self, score: f64) -> f64 {
        self.policy.selection_probability(score)
    }

    fn is_feasible(&self) -> bool {
        self.feasible
    }

    fn tie_score(&self) -> Option<f64> {
        self.policy.tie_score()
    }
}

/// The omniscient rule on probabilities, falling back to selecting everyone
/// when their total is below `k`.
pub(crate) fn rule_or_select_all(probs: &[f64], k: f64) -> Result<RuleOutcome<RandomizedTiePolicy>> {
    match omniscient_rule(probs, k) {
        Ok(policy) => Ok(RuleOutcome { policy, feasible: true }),
        Err(Error::Infeasible { .. }) => Ok(RuleOutcome { policy: RandomizedTiePolicy::select_all(), feasible: false }),
        Err(e) => Err(e),
    }
}

/// The omniscient rule applied to raw pool scores.
pub fn uncalibrated_rule(pool: &Pool, k: f64) -> Result<RuleOutcome<RandomizedTiePolicy>> {
    rule_or_select_all(pool.scores(), k)
}

/// The map `s -> delta_hat(s)`, the empirical qualified mass at or above
/// `s`. Non-increasing in `s`.
///
/// With probability `1 - alpha` over the calibration draw, for every `s`,
/// `|E[Y 1{f(X) >= s}] - map(s)| <= epsilon(alpha, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgCalibratedMap {
    curve: DeltaCurve,
}

impl AvgCalibratedMap {
    pub fn apply(&self, score: f64) -> f64 {
        self.curve.value_at(score)
    }

    pub fn curve(&self) -> &DeltaCurve {
        &self.curve
    }
}

pub fn avg_calibrated_map(cal: &CalibrationSet) -> AvgCalibratedMap {
    AvgCalibratedMap { curve: DeltaCurve::new(cal) }
}
