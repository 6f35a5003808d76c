//! Screening policies and the two oracle rules.
//!
//! Every policy here is pool-independent: the chance a candidate is selected
//! depends on its own score only, which is what [`ScreeningPolicy`] encodes.
//! Deterministic policies never touch the random source; randomized ones draw
//! one uniform per candidate whose selection probability is strictly between
//! 0 and 1, in pool order.

use alloc::vec::Vec;

use crate::bounds::BinModel;
use crate::data::DiscreteWorld;
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::{score_in_range, Pool, Shortlist};

pub trait ScreeningPolicy {
    /// Probability of selecting a candidate with this score.
    fn selection_probability(&self, score: f64) -> f64;

    /// `false` for the empty fallback an infeasible rule returns.
    fn is_feasible(&self) -> bool {
        true
    }

    /// A score at which the policy randomizes, when it only randomizes at a
    /// single point. Used to check a policy against a discrete support.
    fn tie_score(&self) -> Option<f64> {
        None
    }

    fn apply(&self, pool: &Pool, rng: &mut RandomSource) -> Shortlist {
        let start = rng.position();
        let mut drew = false;
        let decisions = pool
            .scores()
            .iter()
            .map(|&s| {
                let p = self.selection_probability(s);
                if p >= 1.0 {
                    true
                } else if p <= 0.0 {
                    false
                } else {
                    drew = true;
                    rng.bernoulli(p)
                }
            })
            .collect();
        let out = Shortlist::from_decisions(decisions).with_rng(drew.then_some(start));
        if self.is_feasible() {
            out
        } else {
            out.flag_infeasible()
        }
    }
}

/// Selects every candidate scoring at least `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    threshold: f64,
}

impl ThresholdPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        if !score_in_range(threshold) {
            return Err(Error::BadParams("threshold must lie in [0, 1]"));
        }
        Ok(ThresholdPolicy { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl ScreeningPolicy for ThresholdPolicy {
    fn selection_probability(&self, score: f64) -> f64 {
        if score >= self.threshold {
            1.0
        } else {
            0.0
        }
    }
}

/// Selects scores strictly above `threshold`, and scores equal to it with
/// probability `tie_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedTiePolicy {
    threshold: f64,
    tie_prob: f64,
    /// Selects nobody. Set for a zero target, where the tie probability is
    /// undefined.
    empty: bool,
}

impl RandomizedTiePolicy {
    pub fn new(threshold: f64, tie_prob: f64) -> Result<Self> {
        if !score_in_range(threshold) {
            return Err(Error::BadParams("threshold must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&tie_prob) {
            return Err(Error::ProbabilityOutOfRange(tie_prob));
        }
        Ok(RandomizedTiePolicy { threshold, tie_prob, empty: false })
    }

    pub fn select_none() -> Self {
        RandomizedTiePolicy { threshold: 1.0, tie_prob: 0.0, empty: true }
    }

    pub fn select_all() -> Self {
        RandomizedTiePolicy { threshold: 0.0, tie_prob: 1.0, empty: false }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn tie_prob(&self) -> f64 {
        self.tie_prob
    }

    pub fn is_empty_selection(&self) -> bool {
        self.empty
    }
}

impl ScreeningPolicy for RandomizedTiePolicy {
    fn selection_probability(&self, score: f64) -> f64 {
        if self.empty {
            0.0
        } else if score > self.threshold {
            1.0
        } else if score == self.threshold {
            self.tie_prob
        } else {
            0.0
        }
    }

    fn tie_score(&self) -> Option<f64> {
        (!self.empty && self.tie_prob > 0.0 && self.tie_prob < 1.0).then_some(self.threshold)
    }
}

/// Selects whole bins from the top down and the last bin it reaches at
/// random.
///
/// `cutoff_bin` is one-based: bins `1..cutoff_bin` are selected,
/// bin `cutoff_bin` with probability `last_bin_prob`, the rest never.
#[derive(Debug, Clone, PartialEq)]
pub struct BinRandomizedPolicy {
    bins: BinModel,
    cutoff_bin: usize,
    last_bin_prob: f64,
    feasible: bool,
}

impl BinRandomizedPolicy {
    pub fn new(bins: BinModel, cutoff_bin: usize, last_bin_prob: f64) -> Result<Self> {
        if cutoff_bin == 0 || cutoff_bin > bins.num_bins() {
            return Err(Error::BadParams("cutoff bin must lie in 1..=B"));
        }
        if !(0.0..=1.0).contains(&last_bin_prob) {
            return Err(Error::ProbabilityOutOfRange(last_bin_prob));
        }
        Ok(BinRandomizedPolicy { bins, cutoff_bin, last_bin_prob, feasible: true })
    }

    /// The empty-selection stand-in for a rule with no feasible solution.
    pub fn infeasible(bins: BinModel) -> Self {
        BinRandomizedPolicy { bins, cutoff_bin: 1, last_bin_prob: 0.0, feasible: false }
    }

    pub fn bins(&self) -> &BinModel {
        &self.bins
    }

    pub fn cutoff_bin(&self) -> usize {
        self.cutoff_bin
    }

    pub fn last_bin_prob(&self) -> f64 {
        self.last_bin_prob
    }
}

impl ScreeningPolicy for BinRandomizedPolicy {
    fn selection_probability(&self, score: f64) -> f64 {
        if !self.feasible {
            return 0.0;
        }
        let bin = self.bins.bin_of(score) + 1;
        match bin.cmp(&self.cutoff_bin) {
            core::cmp::Ordering::Less => 1.0,
            core::cmp::Ordering::Equal => self.last_bin_prob,
            core::cmp::Ordering::Greater => 0.0,
        }
    }

    fn is_feasible(&self) -> bool {
        self.feasible
    }
}

/// Scans `(level, mass)` pairs by descending level for the largest level whose
/// cumulative mass (at or above it) reaches `target`, and returns that level
/// with the fraction of its own mass needed to land exactly on `target`.
/// Fails with the total mass when `target` is out of reach.
fn fill_to_target(mut levels: Vec<(f64, f64)>, target: f64) -> core::result::Result<(f64, f64), f64> {
    levels.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut above = Compensated::default();
    let mut i = 0;
    while i < levels.len() {
        let level = levels[i].0;
        let mut tie = Compensated::default();
        while i < levels.len() && levels[i].0 == level {
            tie.add(levels[i].1);
            i += 1;
        }
        let (a, t) = (above.value(), tie.value());
        if t > 0.0 && a + t >= target {
            let theta = ((target - a) / t).clamp(0.0, 1.0);
            return Ok((level, theta));
        }
        above.add(t);
    }
    Err(above.value())
}

/// Neumaier summation, so that many equal masses add up to their exact
/// total (a hundred copies of `0.05` reach `5`).
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// The optimal rule for a classifier that outputs true qualification
/// probabilities: the smallest expected shortlist from this pool holding
/// exactly `k` qualified candidates in expectation.
pub fn omniscient_rule(probs: &[f64], k: f64) -> Result<RandomizedTiePolicy> {
    if let Some(i) = probs.iter().position(|p| !score_in_range(*p)) {
        return Err(Error::ScoreOutOfRange(i));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidK(k));
    }
    if k == 0.0 {
        return Ok(RandomizedTiePolicy::select_none());
    }
    let levels = probs.iter().map(|&q| (q, q)).collect();
    match fill_to_target(levels, k) {
        Ok((t, theta)) => RandomizedTiePolicy::new(t, theta),
        Err(total) => Err(Error::Infeasible { total_mass: total }),
    }
}

/// The optimal rule for a perfectly calibrated classifier taking values
/// `mus[b]` with probabilities `rhos[b]`, targeting `k` qualified candidates
/// in expectation over pools of `m`.
pub fn calibrated_bins_rule(mus: &[f64], rhos: &[f64], k: f64, m: f64) -> Result<RandomizedTiePolicy> {
    if mus.len() != rhos.len() {
        return Err(Error::LengthMismatch { expected: mus.len(), found: rhos.len() });
    }
    if mus.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = mus.iter().position(|p| !score_in_range(*p)) {
        return Err(Error::ScoreOutOfRange(i));
    }
    if rhos.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (rhos.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::BadDistribution);
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidK(k));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidPoolSize(m));
    }
    if k == 0.0 {
        return Ok(RandomizedTiePolicy::select_none());
    }
    let target = k / m;
    let levels = mus.iter().zip(rhos).map(|(&mu, &rho)| (mu, mu * rho)).collect();
    match fill_to_target(levels, target) {
        Ok((t, theta)) => RandomizedTiePolicy::new(t, theta),
        Err(total) => Err(Error::Infeasible { total_mass: m * total }),
    }
}

fn check_support(policy: &impl ScreeningPolicy, world: &DiscreteWorld) -> Result<()> {
    match policy.tie_score() {
        Some(t) if !world.support().iter().any(|p| p.score == t) => Err(Error::SupportMismatch),
        _ => Ok(()),
    }
}

/// Expected shortlist size over pools of `m` candidates drawn from `world`.
pub fn expected_size(policy: &impl ScreeningPolicy, world: &DiscreteWorld, m: f64) -> Result<f64> {
    check_support(policy, world)?;
    Ok(m * world.support().iter().map(|p| p.weight * policy.selection_probability(p.score)).sum::<f64>())
}

/// Expected number of qualified candidates selected over pools of `m`.
pub fn expected_qualified(policy: &impl ScreeningPolicy, world: &DiscreteWorld, m: f64) -> Result<f64> {
    check_support(policy, world)?;
    Ok(m * world
        .support()
        .iter()
        .map(|p| p.weight * p.qualified_prob * policy.selection_probability(p.score))
        .sum::<f64>())
}
