use alloc::vec::Vec;

use crate::bounds::DeltaCurve;
use crate::policies::ThresholdPolicy;
use crate::types::CalibrationSet;

use super::RuleOutcome;

/// A non-decreasing, right-continuous step function of the score.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicModel {
    /// Distinct calibration scores, ascending.
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicModel {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The fitted value at the largest breakpoint not above `score`; scores
    /// below the first breakpoint get the first value.
    pub fn predict(&self, score: f64) -> f64 {
        let j = self.breakpoints.partition_point(|&b| b <= score);
        self.values[j.saturating_sub(1)]
    }
}

/// Least-squares non-decreasing fit of labels on scores by pool adjacent
/// violators. Examples with equal scores always share a value.
pub fn isotonic_fit(cal: &CalibrationSet) -> IsotonicModel {
    // (first distinct score index, label sum, weight)
    let mut blocks: Vec<(usize, f64, f64)> = Vec::new();
    let mut scores: Vec<f64> = Vec::new();
    for e in cal.examples().iter().rev() {
        let y = f64::from(u8::from(e.label));
        if scores.last() == Some(&e.score) {
            let last = blocks.last_mut().expect("block per score");
            last.1 += y;
            last.2 += 1.0;
        } else {
            scores.push(e.score);
            blocks.push((scores.len() - 1, y, 1.0));
        }
        merge_violators(&mut blocks);
    }
    let mut values = Vec::with_capacity(scores.len());
    for (i, &(start, sum, weight)) in blocks.iter().enumerate() {
        let end = blocks.get(i + 1).map_or(scores.len(), |b| b.0);
        values.extend(core::iter::repeat_n(sum / weight, end - start));
    }
    IsotonicModel { breakpoints: scores, values }
}

fn merge_violators(blocks: &mut Vec<(usize, f64, f64)>) {
    while blocks.len() >= 2 {
        let (_, s1, w1) = blocks[blocks.len() - 1];
        let (_, s0, w0) = blocks[blocks.len() - 2];
        // mean0 > mean1, cross-multiplied to stay exact on counts
        if s0 * w1 > s1 * w0 {
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks");
            last.1 += s1;
            last.2 += w1;
        } else {
            break;
        }
    }
}

/// How the isotonic baseline estimates the qualified mass above `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsotonicVariant {
    /// `h(t) = (1/n) sum_i g(s_i) 1{s_i >= t}` with `g` the isotonic fit.
    #[default]
    PerExample,
    /// Isotonic regression of the empirical curve `t -> delta_hat(t)` itself,
    /// which is already monotone and so is returned unchanged.
    CumulativeCurve,
}

/// The largest calibration score `t` with `m h(t) >= k`. When no score
/// qualifies, selects everyone and is flagged.
pub fn isotonic_rule(
    model: &IsotonicModel,
    cal: &CalibrationSet,
    k: f64,
    m: f64,
    variant: IsotonicVariant,
) -> RuleOutcome<ThresholdPolicy> {
    let n = cal.len() as f64;
    let found = match variant {
        IsotonicVariant::PerExample => {
            let mut h = 0.0;
            let mut found = None;
            let ex = cal.examples();
            let mut i = 0;
            while i < ex.len() {
                let t = ex[i].score;
                while i < ex.len() && ex[i].score == t {
                    h += model.predict(t) / n;
                    i += 1;
                }
                if m * h >= k {
                    found = Some(t);
                    break;
                }
            }
            found
        }
        IsotonicVariant::CumulativeCurve => {
            DeltaCurve::new(cal).descending().find(|&(_, v)| m * v >= k).map(|(t, _)| t)
        }
    };
    match found {
        Some(t) => RuleOutcome { policy: ThresholdPolicy::new(t).expect("calibration score"), feasible: true },
        None => RuleOutcome { policy: ThresholdPolicy::new(0.0).expect("zero"), feasible: false },
    }
}
