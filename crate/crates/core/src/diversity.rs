//! Per-group calibrated selection.
//!
//! Each group gets its own calibrated threshold from its own calibration
//! examples and its own target `k_g` over its expected share of the pool,
//! at level `alpha / |groups|`, so that all groups meet their targets
//! simultaneously with probability `1 - alpha`. The shortlist is the union
//! of the per-group selections. Groups may overlap; a candidate is selected
//! when any of its groups selects it.

use alloc::collections::BTreeMap;

use crate::css::{css_threshold_dynamic, CssResult};
use crate::error::{Error, Result};
use crate::policies::ScreeningPolicy;
use crate::types::{CalibrationSet, GroupId, Pool, Shortlist};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEntry {
    pub k: f64,
    pub expected_m: f64,
    pub calibration: CalibrationSet,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupPlan {
    groups: BTreeMap<GroupId, GroupEntry>,
}

impl GroupPlan {
    pub fn new() -> Self {
        GroupPlan::default()
    }

    pub fn insert(&mut self, group: GroupId, k: f64, expected_m: f64, calibration: CalibrationSet) -> Result<()> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidK(k));
        }
        if !(expected_m.is_finite() && expected_m > 0.0) {
            return Err(Error::InvalidPoolSize(expected_m));
        }
        self.groups.insert(group, GroupEntry { k, expected_m, calibration });
        Ok(())
    }

    /// A plan whose per-group calibration sets are the group members of
    /// `cal`, with targets and expected pool shares given per group.
    pub fn from_calibration(cal: &CalibrationSet, targets: &BTreeMap<GroupId, (f64, f64)>) -> Result<Self> {
        let mut plan = GroupPlan::new();
        for (g, &(k, expected_m)) in targets {
            let sub = cal.for_group(g).ok_or_else(|| Error::EmptyGroupCalibration(g.clone()))?;
            plan.insert(g.clone(), k, expected_m, sub)?;
        }
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, group: &GroupId) -> Option<&GroupEntry> {
        self.groups.get(group)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupId, &GroupEntry)> {
        self.groups.iter()
    }
}

/// Per-group thresholds at level `alpha / |groups|`.
pub fn diversity_thresholds(plan: &GroupPlan, alpha: f64) -> Result<BTreeMap<GroupId, CssResult>> {
    if plan.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let split = alpha / plan.len() as f64;
    plan.iter()
        .map(|(g, e)| Ok((g.clone(), css_threshold_dynamic(&e.calibration, e.k, e.expected_m, split)?)))
        .collect()
}

/// Applies per-group thresholds to a grouped pool. Candidates in no group
/// are never selected. The shortlist is flagged when any group is
/// infeasible.
pub fn diversity_shortlist(results: &BTreeMap<GroupId, CssResult>, pool: &Pool) -> Result<Shortlist> {
    let groups = pool.groups().ok_or(Error::BadParams("pool carries no group labels"))?;
    let mut decisions = alloc::vec::Vec::with_capacity(pool.len());
    for (&s, membership) in pool.scores().iter().zip(groups) {
        let mut selected = false;
        for g in membership.groups() {
            let r = results.get(g).ok_or_else(|| Error::UnknownGroup(g.clone()))?;
            selected |= r.selection_probability(s) == 1.0;
        }
        decisions.push(selected);
    }
    let out = Shortlist::from_decisions(decisions);
    Ok(if results.values().all(CssResult::is_feasible) { out } else { out.flag_infeasible() })
}

pub fn css_diversity(plan: &GroupPlan, alpha: f64, pool: &Pool) -> Result<(Shortlist, BTreeMap<GroupId, CssResult>)> {
    let results = diversity_thresholds(plan, alpha)?;
    let shortlist = diversity_shortlist(&results, pool)?;
    Ok((shortlist, results))
}

/// Splits `k_total` across groups in proportion to their qualified mass.
/// The last group takes the remainder so the targets sum to `k_total`.
pub fn equal_opportunity_split(k_total: f64, masses: &BTreeMap<GroupId, f64>) -> Result<BTreeMap<GroupId, f64>> {
    if !(k_total.is_finite() && k_total >= 0.0) {
        return Err(Error::InvalidK(k_total));
    }
    if masses.values().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::BadParams("group masses must be finite and non-negative"));
    }
    let total: f64 = masses.values().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut out = BTreeMap::new();
    let mut assigned = 0.0;
    let last = masses.len() - 1;
    for (i, (g, &m)) in masses.iter().enumerate() {
        let k = if i == last { k_total - assigned } else { k_total * (m / total) };
        assigned += k;
        out.insert(g.clone(), k);
    }
    Ok(out)
}

/// `(1/n) * #{i : y_i = 1, i in g}` for every group present in `cal`.
pub fn group_qualified_masses(cal: &CalibrationSet) -> BTreeMap<GroupId, f64> {
    let n = cal.len() as f64;
    let mut out = BTreeMap::new();
    for e in cal.examples() {
        for g in e.groups.groups() {
            *out.entry(g.clone()).or_insert(0.0) += f64::from(u8::from(e.label)) / n;
        }
    }
    out
}
