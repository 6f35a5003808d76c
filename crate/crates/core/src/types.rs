//! Domain types shared by every module.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::rng::StreamPosition;

/// Identifier of a demographic (or any other) group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(pub String);

impl GroupId {
    pub fn new(name: impl Into<String>) -> Self {
        GroupId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GroupId {
    fn from(s: &str) -> Self {
        GroupId(String::from(s))
    }
}

/// The set of groups one example belongs to. Usually zero or one group, but
/// groups may overlap. Kept sorted and free of duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Membership(Vec<GroupId>);

impl Membership {
    pub fn none() -> Self {
        Membership(Vec::new())
    }

    pub fn single(group: GroupId) -> Self {
        Membership(alloc::vec![group])
    }

    pub fn from_groups(groups: impl IntoIterator<Item = GroupId>) -> Self {
        let mut v: Vec<GroupId> = groups.into_iter().collect();
        v.sort();
        v.dedup();
        Membership(v)
    }

    pub fn contains(&self, group: &GroupId) -> bool {
        self.0.binary_search(group).is_ok()
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One calibration (or evaluation) example: the classifier's score, whether
/// the candidate turned out to be qualified, and its group membership.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample {
    pub score: f64,
    pub label: bool,
    pub groups: Membership,
}

impl ScoredExample {
    pub fn new(score: f64, label: bool) -> Self {
        ScoredExample { score, label, groups: Membership::none() }
    }

    pub fn with_group(score: f64, label: bool, group: GroupId) -> Self {
        ScoredExample { score, label, groups: Membership::single(group) }
    }
}

pub(crate) fn score_in_range(s: f64) -> bool {
    (0.0..=1.0).contains(&s)
}

/// Calibration data, stored by descending score.
///
/// Equal scores keep their input order, so every step function computed from
/// the set is a deterministic function of the input list.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    examples: Vec<ScoredExample>,
    positives: usize,
}

impl CalibrationSet {
    pub fn new(mut examples: Vec<ScoredExample>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, e) in examples.iter_mut().enumerate() {
            if !score_in_range(e.score) {
                return Err(Error::ScoreOutOfRange(i));
            }
            // folds -0.0 into +0.0
            e.score += 0.0;
        }
        examples.sort_by(|a, b| b.score.total_cmp(&a.score));
        let positives = examples.iter().filter(|e| e.label).count();
        Ok(CalibrationSet { examples, positives })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[ScoredExample] {
        &self.examples
    }

    /// Number of examples with a positive label.
    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn positive_rate(&self) -> f64 {
        self.positives as f64 / self.len() as f64
    }

    pub fn max_score(&self) -> f64 {
        self.examples[0].score
    }

    pub fn min_score(&self) -> f64 {
        self.examples[self.examples.len() - 1].score
    }

    /// The examples belonging to `group`, or `None` when there are none.
    pub fn for_group(&self, group: &GroupId) -> Option<CalibrationSet> {
        let subset: Vec<ScoredExample> =
            self.examples.iter().filter(|e| e.groups.contains(group)).cloned().collect();
        CalibrationSet::new(subset).ok()
    }

    /// Every group that appears in the data, in order.
    pub fn groups(&self) -> Vec<GroupId> {
        let mut out: Vec<GroupId> =
            self.examples.iter().flat_map(|e| e.groups.groups().iter().cloned()).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// A pool of candidates to screen.
///
/// Policies only look at `scores` (and `groups` for the per-group rule);
/// `labels` exist in simulation so the harness can measure outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    scores: Vec<f64>,
    labels: Option<Vec<bool>>,
    groups: Option<Vec<Membership>>,
}

impl Pool {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !score_in_range(*s)) {
            return Err(Error::ScoreOutOfRange(i));
        }
        Ok(Pool { scores, labels: None, groups: None })
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.scores.len() {
            return Err(Error::LengthMismatch { expected: self.scores.len(), found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Vec<Membership>) -> Result<Self> {
        if groups.len() != self.scores.len() {
            return Err(Error::LengthMismatch { expected: self.scores.len(), found: groups.len() });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn from_examples(examples: &[ScoredExample]) -> Result<Self> {
        let pool = Pool::new(examples.iter().map(|e| e.score).collect())?;
        let pool = pool.with_labels(examples.iter().map(|e| e.label).collect())?;
        if examples.iter().any(|e| !e.groups.is_empty()) {
            pool.with_groups(examples.iter().map(|e| e.groups.clone()).collect())
        } else {
            Ok(pool)
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn groups(&self) -> Option<&[Membership]> {
        self.groups.as_deref()
    }

    /// Same candidates with every score passed through `map`.
    pub fn map_scores(&self, mut map: impl FnMut(f64) -> f64) -> Result<Pool> {
        let mut out = Pool::new(self.scores.iter().map(|&s| map(s)).collect())?;
        out.labels = self.labels.clone();
        out.groups = self.groups.clone();
        Ok(out)
    }

    /// Indices of candidates belonging to `group`.
    pub fn indices_of(&self, group: &GroupId) -> Vec<usize> {
        match &self.groups {
            Some(g) => g.iter().enumerate().filter(|(_, m)| m.contains(group)).map(|(i, _)| i).collect(),
            None => Vec::new(),
        }
    }

    /// The sub-pool at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Pool {
        Pool {
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            groups: self.groups.as_ref().map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
        }
    }
}

/// The `(k, m, alpha)` contract: at least `k` qualified candidates in
/// expectation over pools of (expected) size `pool_size`, with probability
/// at least `1 - alpha` over the calibration draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeConfig {
    k: f64,
    pool_size: f64,
    alpha: f64,
}

impl GuaranteeConfig {
    pub fn new(k: f64, pool_size: f64, alpha: f64) -> Result<Self> {
        let cfg = GuaranteeConfig::unchecked(k, pool_size, alpha)?;
        if k > pool_size {
            return Err(Error::KExceedsPoolSize { k, pool_size });
        }
        Ok(cfg)
    }

    /// Validates ranges but allows `k > pool_size`; such a contract is simply
    /// infeasible for every calibration set.
    pub(crate) fn unchecked(k: f64, pool_size: f64, alpha: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidK(k));
        }
        if !(pool_size.is_finite() && pool_size > 0.0) {
            return Err(Error::InvalidPoolSize(pool_size));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(GuaranteeConfig { k, pool_size, alpha })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn pool_size(&self) -> f64 {
        self.pool_size
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Target qualified mass per candidate, `k / m`.
    pub fn target_rate(&self) -> f64 {
        self.k / self.pool_size
    }
}

impl Default for GuaranteeConfig {
    fn default() -> Self {
        GuaranteeConfig { k: 5.0, pool_size: 100.0, alpha: 0.1 }
    }
}

/// Per-candidate shortlisting decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortlist {
    decisions: Vec<bool>,
    realized_size: usize,
    /// Where the random draws started, when any were made.
    rng: Option<StreamPosition>,
    feasible: bool,
}

impl Shortlist {
    pub fn from_decisions(decisions: Vec<bool>) -> Self {
        let realized_size = decisions.iter().filter(|&&d| d).count();
        Shortlist { decisions, realized_size, rng: None, feasible: true }
    }

    pub fn empty(len: usize) -> Self {
        Shortlist::from_decisions(alloc::vec![false; len])
    }

    pub(crate) fn with_rng(mut self, pos: Option<StreamPosition>) -> Self {
        self.rng = pos;
        self
    }

    /// Marks the shortlist as produced by a fallback (the policy had no
    /// feasible solution).
    pub fn flag_infeasible(mut self) -> Self {
        self.feasible = false;
        self
    }

    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    pub fn realized_size(&self) -> usize {
        self.realized_size
    }

    pub fn rng_used(&self) -> Option<StreamPosition> {
        self.rng
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    /// Selected candidates with a positive label.
    pub fn qualified_count(&self, labels: &[bool]) -> usize {
        self.decisions.iter().zip(labels).filter(|(&d, &y)| d && y).count()
    }

    /// Union with another shortlist over the same pool.
    pub fn union(&self, other: &Shortlist) -> Shortlist {
        let decisions = self.decisions.iter().zip(&other.decisions).map(|(a, b)| *a || *b).collect();
        let mut out = Shortlist::from_decisions(decisions);
        out.feasible = self.feasible && other.feasible;
        out
    }
}
