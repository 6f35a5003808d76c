//! The two-group experiment: a noiseless majority and a minority whose
//! classifier noise is swept.
//!
//! The total target `k` is split across groups in proportion to their
//! qualified mass estimated on the calibration set, and each group's
//! expected pool share is likewise estimated. Per run and per group:
//!
//! - `EQ` is 1 when the mean number of qualified group members selected
//!   reaches the group's target;
//! - `SS` is the mean number of group members selected;
//! - `qualified_share` is the group's fraction of all qualified candidates
//!   selected.
//!
//! The `all` group row scores the whole shortlist against the total `k`.
//! `css-div` thresholds each group separately; `css` is the ungrouped
//! calibrated rule; the baselines are fitted and applied within each group.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use css_core::baselines::{isotonic_fit, isotonic_rule, platt_fit, platt_rule, uncalibrated_rule, IsotonicVariant};
use css_core::css::css_threshold;
use css_core::data::{sample_calibration, sample_pool, GroupSpec, GroupedNoisyWorld};
use css_core::diversity::{diversity_shortlist, diversity_thresholds, equal_opportunity_split, group_qualified_masses, GroupPlan};
use css_core::policies::ScreeningPolicy;
use css_core::{derive_stream, CalibrationSet, GroupId, GuaranteeConfig, Pool, RandomSource, Shortlist};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::experiment::{stream_id, Method};
use crate::io::{self, fmt17};

pub const MAJORITY: &str = "majority";
pub const MINORITY: &str = "minority";

const CAL_SLOT: u64 = 4002;
const POOL_SLOT: u64 = 4003;

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityConfig {
    pub methods: Vec<Method>,
    pub k: f64,
    pub m: usize,
    pub alpha: f64,
    pub n_cal: usize,
    pub runs: usize,
    pub test_pools: usize,
    pub master_seed: u64,
    pub majority_share: f64,
    pub majority_noise: f64,
    /// Swept minority noise ratios.
    pub minority_noise: Vec<f64>,
    pub isotonic_variant: IsotonicVariant,
    pub parallel: bool,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig {
            methods: vec![Method::CssDiv, Method::Css, Method::Uncalibrated, Method::Platt, Method::Isotonic],
            k: 5.0,
            m: 100,
            alpha: 0.1,
            n_cal: 10_000,
            runs: 100,
            test_pools: 1000,
            master_seed: 0,
            majority_share: 0.7,
            majority_noise: 0.0,
            minority_noise: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            isotonic_variant: IsotonicVariant::PerExample,
            parallel: true,
        }
    }
}

impl DiversityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.test_pools == 0 {
            return Err(HarnessError::Config("runs and test pools must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods selected".into()));
        }
        if let Some(m) = self.methods.iter().find(|m| matches!(m, Method::Umb(_))) {
            return Err(HarnessError::Config(format!("{m} is not part of the diversity experiment")));
        }
        if self.minority_noise.is_empty() {
            return Err(HarnessError::Config("no minority noise values".into()));
        }
        if !(self.majority_share > 0.0 && self.majority_share < 1.0) {
            return Err(HarnessError::Config(format!("majority share {} not in (0, 1)", self.majority_share)));
        }
        if self.m == 0 || self.n_cal == 0 {
            return Err(HarnessError::Config("m and n-cal must be at least 1".into()));
        }
        GuaranteeConfig::new(self.k, self.m as f64, self.alpha)?;
        for &r in &self.minority_noise {
            self.world(r)?;
        }
        Ok(())
    }

    pub fn world(&self, minority_noise: f64) -> Result<GroupedNoisyWorld> {
        Ok(GroupedNoisyWorld::new(vec![
            GroupSpec { id: GroupId::new(MAJORITY), share: self.majority_share, r_noise: self.majority_noise },
            GroupSpec { id: GroupId::new(MINORITY), share: 1.0 - self.majority_share, r_noise: minority_noise },
        ])?)
    }
}

/// One method, one run, one group (`None` is the whole shortlist).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub method: Method,
    pub sweep_value: f64,
    pub run_id: usize,
    pub group: Option<GroupId>,
    pub k_target: f64,
    pub eq: bool,
    pub ss: f64,
    pub feasible: bool,
    pub mean_qualified: f64,
    pub qualified_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAggregate {
    pub method: Method,
    pub sweep_value: f64,
    pub group: Option<GroupId>,
    pub runs: usize,
    pub eq_mean: f64,
    pub eq_se: f64,
    pub feasible_rate: f64,
    pub n_feasible: usize,
    /// Mean over feasible runs.
    pub ss_mean: Option<f64>,
    pub ss_sd: Option<f64>,
    pub ss_se: Option<f64>,
    pub mean_qualified: f64,
    /// Mean over feasible runs.
    pub qualified_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityTable {
    pub rows: Vec<GroupReport>,
    pub aggregates: Vec<GroupAggregate>,
}

impl DiversityTable {
    pub fn aggregate_for(&self, method: Method, sweep_value: f64, group: Option<&str>) -> Option<&GroupAggregate> {
        self.aggregates.iter().find(|a| {
            a.method == method && a.sweep_value == sweep_value && a.group.as_ref().map(GroupId::as_str) == group
        })
    }
}

type Decide = Box<dyn Fn(&Pool, &mut RandomSource) -> Result<Shortlist> + Send + Sync>;

struct GroupTarget {
    id: GroupId,
    k: f64,
    expected_m: f64,
    calibration: CalibrationSet,
}

fn targets(cfg: &DiversityConfig, cal: &CalibrationSet) -> Result<Vec<GroupTarget>> {
    let masses = group_qualified_masses(cal);
    let mut masses_all = BTreeMap::new();
    for g in [MAJORITY, MINORITY] {
        masses_all.insert(GroupId::new(g), masses.get(&GroupId::new(g)).copied().unwrap_or(0.0));
    }
    let split = equal_opportunity_split(cfg.k, &masses_all)?;
    split
        .into_iter()
        .map(|(id, k)| {
            let calibration = cal.for_group(&id).ok_or_else(|| css_core::Error::EmptyGroupCalibration(id.clone()))?;
            let expected_m = cfg.m as f64 * calibration.len() as f64 / cal.len() as f64;
            Ok(GroupTarget { id, k, expected_m, calibration })
        })
        .collect()
}

/// Applies a per-group rule within each group's part of the pool.
fn per_group(
    targets: &[GroupTarget],
    rule: impl Fn(usize, &Pool, &mut RandomSource) -> Result<Shortlist> + Send + Sync + 'static,
) -> Decide {
    let ids: Vec<GroupId> = targets.iter().map(|t| t.id.clone()).collect();
    Box::new(move |pool, rng| {
        let mut decisions = vec![false; pool.len()];
        let mut feasible = true;
        for (gi, g) in ids.iter().enumerate() {
            let idx = pool.indices_of(g);
            if idx.is_empty() {
                continue;
            }
            let s = rule(gi, &pool.select(&idx), rng)?;
            feasible &= s.is_feasible();
            for (&i, &d) in idx.iter().zip(s.decisions()) {
                decisions[i] = d;
            }
        }
        let out = Shortlist::from_decisions(decisions);
        Ok(if feasible { out } else { out.flag_infeasible() })
    })
}

/// The method's decision rule and whether it is feasible before seeing any
/// pool (`None` when that depends on the pool).
fn fit(method: Method, cfg: &DiversityConfig, cal: &CalibrationSet, targets: &[GroupTarget]) -> Result<(Decide, Option<bool>)> {
    Ok(match method {
        Method::CssDiv => {
            let mut plan = GroupPlan::new();
            for t in targets {
                plan.insert(t.id.clone(), t.k, t.expected_m, t.calibration.clone())?;
            }
            let results = diversity_thresholds(&plan, cfg.alpha)?;
            let feasible = results.values().all(|r| r.is_feasible());
            (Box::new(move |pool: &Pool, _: &mut RandomSource| Ok(diversity_shortlist(&results, pool)?)), Some(feasible))
        }
        Method::Css => {
            let r = css_threshold(cal, &GuaranteeConfig::new(cfg.k, cfg.m as f64, cfg.alpha)?);
            let feasible = r.is_feasible();
            (Box::new(move |pool: &Pool, rng: &mut RandomSource| Ok(r.apply(pool, rng))), Some(feasible))
        }
        Method::Uncalibrated => {
            let ks: Vec<f64> = targets.iter().map(|t| t.k).collect();
            (per_group(targets, move |gi, pool, rng| Ok(uncalibrated_rule(pool, ks[gi])?.apply(pool, rng))), None)
        }
        Method::Platt => {
            let ks: Vec<f64> = targets.iter().map(|t| t.k).collect();
            let models = targets.iter().map(|t| platt_fit(&t.calibration)).collect::<css_core::Result<Vec<_>>>()?;
            (per_group(targets, move |gi, pool, rng| Ok(platt_rule(&models[gi], pool, ks[gi])?.apply(pool, rng))), None)
        }
        Method::Isotonic => {
            let rules: Vec<_> = targets
                .iter()
                .map(|t| isotonic_rule(&isotonic_fit(&t.calibration), &t.calibration, t.k, t.expected_m, cfg.isotonic_variant))
                .collect();
            let feasible = rules.iter().all(|r| r.feasible);
            (per_group(targets, move |gi, pool, rng| Ok(rules[gi].apply(pool, rng))), Some(feasible))
        }
        Method::Umb(_) => return Err(HarnessError::Config(format!("{method} is not part of the diversity experiment"))),
    })
}

fn infeasible_rows(method: Method, value: f64, run_id: usize, groups: &[(Option<GroupId>, f64)]) -> Vec<GroupReport> {
    groups
        .iter()
        .map(|(g, k)| GroupReport {
            method,
            sweep_value: value,
            run_id,
            group: g.clone(),
            k_target: *k,
            eq: false,
            ss: 0.0,
            feasible: false,
            mean_qualified: 0.0,
            qualified_share: 0.0,
        })
        .collect()
}

/// Rows for every method on one (sweep value, run) cell: per method, the
/// majority, minority and `all` rows.
pub fn run_cell(cfg: &DiversityConfig, sweep_index: usize, run_id: usize) -> Result<Vec<GroupReport>> {
    let value = cfg.minority_noise[sweep_index];
    let cell = sweep_index * cfg.runs + run_id;
    let world = cfg.world(value)?;
    let cal = sample_calibration(&world, cfg.n_cal, &mut derive_stream(cfg.master_seed, stream_id(cell, CAL_SLOT)))?;
    let mut pool_rng = derive_stream(cfg.master_seed, stream_id(cell, POOL_SLOT));
    let pools = (0..cfg.test_pools).map(|_| sample_pool(&world, cfg.m, &mut pool_rng)).collect::<css_core::Result<Vec<Pool>>>()?;
    let group_ids = [GroupId::new(MAJORITY), GroupId::new(MINORITY)];
    let members: Vec<[Vec<usize>; 2]> = pools.iter().map(|p| [p.indices_of(&group_ids[0]), p.indices_of(&group_ids[1])]).collect();

    let targets = targets(cfg, &cal);
    let row_keys: Vec<(Option<GroupId>, f64)> = match &targets {
        Ok(ts) => ts.iter().map(|t| (Some(t.id.clone()), t.k)).chain([(None, cfg.k)]).collect(),
        Err(_) => group_ids.iter().map(|g| (Some(g.clone()), f64::NAN)).chain([(None, cfg.k)]).collect(),
    };

    let mut out = Vec::new();
    for &method in &cfg.methods {
        let fitted = targets.as_ref().map_err(|_| ()).and_then(|ts| fit(method, cfg, &cal, ts).map_err(|_| ()));
        let Ok((decide, fixed_feasible)) = fitted else {
            out.extend(infeasible_rows(method, value, run_id, &row_keys));
            continue;
        };
        if fixed_feasible == Some(false) && method != Method::Isotonic {
            out.extend(infeasible_rows(method, value, run_id, &row_keys));
            continue;
        }
        let mut rng = derive_stream(cfg.master_seed, stream_id(cell, method.stream_slot()));
        let (mut size, mut qual) = ([0usize; 2], [0usize; 2]);
        let mut feasible = fixed_feasible.unwrap_or(true);
        let mut failed = false;
        for (pool, idx) in pools.iter().zip(&members) {
            let Ok(s) = decide(pool, &mut rng) else {
                failed = true;
                break;
            };
            feasible &= s.is_feasible();
            let labels = pool.labels().expect("simulated pools carry labels");
            for g in 0..2 {
                for &i in &idx[g] {
                    if s.decisions()[i] {
                        size[g] += 1;
                        qual[g] += usize::from(labels[i]);
                    }
                }
            }
        }
        if failed {
            out.extend(infeasible_rows(method, value, run_id, &row_keys));
            continue;
        }
        let t = cfg.test_pools as f64;
        let total_qual = qual[0] + qual[1];
        for (g, k_target) in &row_keys {
            let (s, q) = match g {
                Some(g) => {
                    let gi = usize::from(g.as_str() == MINORITY);
                    (size[gi], qual[gi])
                }
                None => (size[0] + size[1], total_qual),
            };
            let mean_qualified = q as f64 / t;
            out.push(GroupReport {
                method,
                sweep_value: value,
                run_id,
                group: g.clone(),
                k_target: *k_target,
                eq: mean_qualified >= *k_target,
                ss: s as f64 / t,
                feasible,
                mean_qualified,
                qualified_share: if total_qual == 0 { 0.0 } else { q as f64 / total_qual as f64 },
            });
        }
    }
    Ok(out)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn summarize(rows: &[&GroupReport]) -> GroupAggregate {
    let first = rows[0];
    let runs = rows.len();
    let eq: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.eq))).collect();
    let (eq_mean, eq_sd) = mean_sd(&eq);
    let feasible: Vec<&&GroupReport> = rows.iter().filter(|r| r.feasible).collect();
    let ss: Vec<f64> = feasible.iter().map(|r| r.ss).collect();
    let (ss_mean, ss_sd, ss_se, qualified_share) = if ss.is_empty() {
        (None, None, None, None)
    } else {
        let (m, sd) = mean_sd(&ss);
        let share = feasible.iter().map(|r| r.qualified_share).sum::<f64>() / ss.len() as f64;
        (Some(m), Some(sd), Some(sd / (ss.len() as f64).sqrt()), Some(share))
    };
    GroupAggregate {
        method: first.method,
        sweep_value: first.sweep_value,
        group: first.group.clone(),
        runs,
        eq_mean,
        eq_se: eq_sd / (runs as f64).sqrt(),
        feasible_rate: ss.len() as f64 / runs as f64,
        n_feasible: ss.len(),
        ss_mean,
        ss_sd,
        ss_se,
        mean_qualified: rows.iter().map(|r| r.mean_qualified).sum::<f64>() / runs as f64,
        qualified_share,
    }
}

pub fn run_diversity(cfg: &DiversityConfig) -> Result<DiversityTable> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = (0..cfg.minority_noise.len()).flat_map(|s| (0..cfg.runs).map(move |r| (s, r))).collect();
    let per_cell: Vec<Vec<GroupReport>> = if cfg.parallel {
        cells.par_iter().map(|&(s, r)| run_cell(cfg, s, r)).collect::<Result<_>>()?
    } else {
        cells.iter().map(|&(s, r)| run_cell(cfg, s, r)).collect::<Result<_>>()?
    };
    // Rows ordered by (sweep value, method, group, run); 3 rows per method per cell.
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for s in 0..cfg.minority_noise.len() {
        for mi in 0..cfg.methods.len() {
            for gi in 0..3 {
                let block: Vec<&GroupReport> = (0..cfg.runs).map(|r| &per_cell[s * cfg.runs + r][mi * 3 + gi]).collect();
                aggregates.push(summarize(&block));
                rows.extend(block.into_iter().cloned());
            }
        }
    }
    Ok(DiversityTable { rows, aggregates })
}

pub const DIVERSITY_HEADER: [&str; 14] = [
    "method",
    "sweep_value",
    "run_id",
    "group",
    "k_target",
    "EQ",
    "SS",
    "feasible",
    "mean_qualified",
    "qualified_share",
    "eq_se",
    "ss_sd",
    "ss_se",
    "n_feasible",
];

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn group_name(g: &Option<GroupId>) -> String {
    g.as_ref().map_or("all".to_string(), |g| g.as_str().to_string())
}

/// Per-run rows of each (method, sweep value, group) block followed by the
/// block's aggregate row, whose `run_id` is `all`.
pub fn write_diversity<W: Write>(out: W, table: &DiversityTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| HarnessError::Config(format!("csv write: {e}"));
    w.write_record(DIVERSITY_HEADER).map_err(err)?;
    let mut start = 0;
    for a in &table.aggregates {
        for r in &table.rows[start..start + a.runs] {
            w.write_record([
                r.method.to_string(),
                fmt17(r.sweep_value),
                r.run_id.to_string(),
                group_name(&r.group),
                fmt17(r.k_target),
                u8::from(r.eq).to_string(),
                fmt17(r.ss),
                u8::from(r.feasible).to_string(),
                fmt17(r.mean_qualified),
                fmt17(r.qualified_share),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])
            .map_err(err)?;
        }
        start += a.runs;
        w.write_record([
            a.method.to_string(),
            fmt17(a.sweep_value),
            "all".to_string(),
            group_name(&a.group),
            String::new(),
            fmt17(a.eq_mean),
            opt(a.ss_mean),
            fmt17(a.feasible_rate),
            fmt17(a.mean_qualified),
            opt(a.qualified_share),
            fmt17(a.eq_se),
            opt(a.ss_sd),
            opt(a.ss_se),
            a.n_feasible.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::Config(format!("csv write: {e}")))?;
    Ok(())
}

pub fn emit_diversity_csv(table: &DiversityTable, path: &Path) -> Result<()> {
    let mut f = io::create(path)?;
    write_diversity(&mut f, table)?;
    f.flush().map_err(|e| HarnessError::io(path, e))
}

/// Number of data rows in a diversity CSV, for quick checks.
pub fn count_rows<R: Read>(input: R) -> Result<usize> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut n = 0;
    for rec in rdr.records() {
        rec.map_err(|e| HarnessError::Parse { line: e.position().map_or(0, |p| p.line()), column: "method".into() })?;
        n += 1;
    }
    Ok(n)
}
