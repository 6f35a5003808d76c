//! The calibrated threshold.
//!
//! The threshold is the largest `t` whose empirical qualified mass clears the
//! target rate by the uniform deviation bound:
//! `t = sup { t : delta_hat(t) >= k/m + epsilon(alpha, n) }`. The empirical
//! curve only changes at calibration scores and is left-open, right-closed,
//! so the supremum is attained at one of them and a single descending scan
//! over distinct scores finds it exactly.

use crate::bounds::{epsilon, DeltaCurve};
use crate::error::Result;
use crate::policies::ScreeningPolicy;
use crate::types::{CalibrationSet, GuaranteeConfig, Pool, Shortlist};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CssResult {
    threshold: f64,
    epsilon: f64,
    delta: f64,
    feasible: bool,
    config: GuaranteeConfig,
}

impl CssResult {
    /// The selected threshold; `f64::INFINITY` when infeasible.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Empirical qualified mass at the threshold (zero when infeasible).
    pub fn delta_at_threshold(&self) -> f64 {
        self.delta
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    pub fn config(&self) -> &GuaranteeConfig {
        &self.config
    }

    /// Qualified mass per candidate the threshold must keep.
    pub fn requirement(&self) -> f64 {
        self.config.target_rate() + self.epsilon
    }
}

impl ScreeningPolicy for CssResult {
    fn selection_probability(&self, score: f64) -> f64 {
        if self.feasible && score >= self.threshold {
            1.0
        } else {
            0.0
        }
    }

    fn is_feasible(&self) -> bool {
        self.feasible
    }
}

pub fn css_threshold(cal: &CalibrationSet, cfg: &GuaranteeConfig) -> CssResult {
    css_threshold_from_curve(&DeltaCurve::new(cal), cfg)
}

/// [`css_threshold`] on a precomputed curve.
pub fn css_threshold_from_curve(curve: &DeltaCurve, cfg: &GuaranteeConfig) -> CssResult {
    // The curve always has n >= 1 and the config a valid alpha.
    let eps = epsilon(cfg.alpha(), curve.n()).expect("validated alpha and n");
    let requirement = cfg.target_rate() + eps;
    match curve.descending().find(|&(_, value)| value >= requirement) {
        Some((t, value)) => CssResult { threshold: t, epsilon: eps, delta: value, feasible: true, config: *cfg },
        None => CssResult { threshold: f64::INFINITY, epsilon: eps, delta: 0.0, feasible: false, config: *cfg },
    }
}

/// The threshold when the pool size is random with mean `expected_m`.
///
/// A target above the expected pool size is accepted and comes back
/// infeasible.
pub fn css_threshold_dynamic(cal: &CalibrationSet, k: f64, expected_m: f64, alpha: f64) -> Result<CssResult> {
    let cfg = GuaranteeConfig::unchecked(k, expected_m, alpha)?;
    Ok(css_threshold(cal, &cfg))
}

/// Selects every candidate scoring at least the threshold. An infeasible
/// result selects nobody and flags the shortlist.
pub fn css_shortlist(result: &CssResult, pool: &Pool) -> Shortlist {
    let decisions = pool.scores().iter().map(|&s| result.selection_probability(s) == 1.0).collect();
    let out = Shortlist::from_decisions(decisions);
    if result.feasible {
        out
    } else {
        out.flag_infeasible()
    }
}
