//! Repeated screening trials on the noisy-classifier world.
//!
//! A *cell* is one `(sweep value, run)` pair. Each cell draws one
//! calibration set and `test_pools` pools, fits every method on the
//! calibration set, and scores each method on the same pools. Per run:
//!
//! - `EQ` is 1 when the mean number of qualified candidates selected over
//!   the pools reaches `k`;
//! - `SS` is the mean shortlist size over the pools.
//!
//! A method with no feasible policy reports `EQ = 0`, `SS = 0` and
//! `feasible = 0`; baselines instead select everyone, report the metrics of
//! that fallback, and are flagged.
//!
//! Every cell owns derived random streams, so results do not depend on
//! execution order or on which other methods are run.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use css_core::baselines::{isotonic_fit, isotonic_rule, platt_fit, platt_rule, uncalibrated_rule, IsotonicVariant};
use css_core::bounds::bin_deltas;
use css_core::css::css_threshold;
use css_core::data::{sample_calibration, sample_pool, NoisyClassifierWorld};
use css_core::multibin::{multibin_policy, umb_edges};
use css_core::policies::ScreeningPolicy;
use css_core::{derive_stream, CalibrationSet, GuaranteeConfig, Pool, RandomSource};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::io::{self, fmt17};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Css,
    CssDiv,
    Umb(usize),
    Uncalibrated,
    Platt,
    Isotonic,
}

impl Method {
    /// The methods of the noise and sample-size sweeps.
    pub fn standard() -> Vec<Method> {
        vec![Method::Css, Method::Umb(2), Method::Umb(5), Method::Umb(10), Method::Uncalibrated, Method::Platt, Method::Isotonic]
    }

    /// Fixed per-method offset for stream derivation.
    pub(crate) fn stream_slot(self) -> u64 {
        match self {
            Method::Css => 0,
            Method::CssDiv => 1,
            Method::Uncalibrated => 2,
            Method::Platt => 3,
            Method::Isotonic => 4,
            Method::Umb(b) => 16 + b as u64,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Css => f.write_str("css"),
            Method::CssDiv => f.write_str("css-div"),
            Method::Umb(b) => write!(f, "umb-{b}"),
            Method::Uncalibrated => f.write_str("uncalibrated"),
            Method::Platt => f.write_str("platt"),
            Method::Isotonic => f.write_str("isotonic"),
        }
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "css" => Ok(Method::Css),
            "css-div" => Ok(Method::CssDiv),
            "uncalibrated" => Ok(Method::Uncalibrated),
            "platt" => Ok(Method::Platt),
            "isotonic" => Ok(Method::Isotonic),
            other => other
                .strip_prefix("umb-")
                .and_then(|b| b.parse().ok())
                .filter(|&b: &usize| (1..1000).contains(&b))
                .map(Method::Umb)
                .ok_or_else(|| HarnessError::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Noise,
    NCal,
    K,
    Alpha,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Noise => "noise",
            SweepAxis::NCal => "n",
            SweepAxis::K => "k",
            SweepAxis::Alpha => "alpha",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "noise" | "r_noise" => Ok(SweepAxis::Noise),
            "n" | "n-cal" | "n_cal" => Ok(SweepAxis::NCal),
            "k" => Ok(SweepAxis::K),
            "alpha" => Ok(SweepAxis::Alpha),
            other => Err(HarnessError::Config(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = HarnessError;

    /// `axis=v1,v2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (axis, list) = s.split_once('=').ok_or_else(|| HarnessError::Config(format!("sweep `{s}` is not axis=values")))?;
        let values = list
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| v.trim().parse::<f64>().map_err(|_| HarnessError::Config(format!("bad sweep value `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Sweep { axis: axis.parse()?, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub k: f64,
    pub m: usize,
    pub alpha: f64,
    pub n_cal: usize,
    pub r_noise: f64,
    pub runs: usize,
    pub test_pools: usize,
    pub master_seed: u64,
    /// `None` or an empty value list runs a single cell at the defaults.
    pub sweep: Option<Sweep>,
    pub isotonic_variant: IsotonicVariant,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::standard(),
            k: 5.0,
            m: 100,
            alpha: 0.1,
            n_cal: 10_000,
            r_noise: 0.0,
            runs: 100,
            test_pools: 1000,
            master_seed: 0,
            sweep: None,
            isotonic_variant: IsotonicVariant::PerExample,
            parallel: true,
        }
    }
}

/// The parameters of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub k: f64,
    pub m: usize,
    pub alpha: f64,
    pub n_cal: usize,
    pub r_noise: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.test_pools == 0 {
            return Err(HarnessError::Config("runs and test pools must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods selected".into()));
        }
        if self.methods.contains(&Method::CssDiv) {
            return Err(HarnessError::Config("css-div runs in the diversity experiment".into()));
        }
        for v in self.sweep_values() {
            self.params_at(v)?;
        }
        Ok(())
    }

    /// Sweep values, or the single placeholder value `NaN` when not sweeping.
    pub fn sweep_values(&self) -> Vec<f64> {
        match &self.sweep {
            Some(s) if !s.values.is_empty() => s.values.clone(),
            _ => vec![self.default_sweep_value()],
        }
    }

    fn default_sweep_value(&self) -> f64 {
        match self.sweep.as_ref().map(|s| s.axis) {
            Some(SweepAxis::NCal) => self.n_cal as f64,
            Some(SweepAxis::K) => self.k,
            Some(SweepAxis::Alpha) => self.alpha,
            Some(SweepAxis::Noise) | None => self.r_noise,
        }
    }

    pub fn params_at(&self, value: f64) -> Result<CellParams> {
        let mut p = CellParams { k: self.k, m: self.m, alpha: self.alpha, n_cal: self.n_cal, r_noise: self.r_noise };
        match self.sweep.as_ref().map(|s| s.axis) {
            Some(SweepAxis::Noise) => p.r_noise = value,
            Some(SweepAxis::NCal) => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(HarnessError::Config(format!("calibration size {value} is not a positive integer")));
                }
                p.n_cal = value as usize;
            }
            Some(SweepAxis::K) => p.k = value,
            Some(SweepAxis::Alpha) => p.alpha = value,
            None => {}
        }
        if p.m == 0 || p.n_cal == 0 {
            return Err(HarnessError::Config("m and n-cal must be at least 1".into()));
        }
        GuaranteeConfig::new(p.k, p.m as f64, p.alpha)?;
        NoisyClassifierWorld::new(p.r_noise)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub method: Method,
    pub sweep_value: f64,
    pub run_id: usize,
    pub eq: bool,
    pub ss: f64,
    pub feasible: bool,
    pub mean_qualified: f64,
    pub policy: String,
}

/// Per-(method, sweep value) summary over runs. Shortlist-size statistics
/// use feasible runs only; `None` when there are none.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub sweep_value: f64,
    pub runs: usize,
    pub eq_mean: f64,
    pub eq_se: f64,
    pub feasible_rate: f64,
    pub n_feasible: usize,
    pub ss_mean: Option<f64>,
    pub ss_sd: Option<f64>,
    pub ss_se: Option<f64>,
    pub mean_qualified: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub axis: Option<SweepAxis>,
    pub trials: Vec<TrialReport>,
    pub aggregates: Vec<Aggregate>,
}

/// Stream id for slot `slot` of cell `cell`.
pub(crate) fn stream_id(cell: usize, slot: u64) -> u64 {
    ((cell as u64) << 12) | slot
}

const CAL_SLOT: u64 = 4000;
const POOL_SLOT: u64 = 4001;

/// Outcome of one method on one pool.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PoolOutcome {
    pub size: usize,
    pub qualified: usize,
    pub feasible: bool,
}

pub(crate) fn outcome(policy: &impl ScreeningPolicy, pool: &Pool, rng: &mut RandomSource) -> PoolOutcome {
    let s = policy.apply(pool, rng);
    PoolOutcome {
        size: s.realized_size(),
        qualified: s.qualified_count(pool.labels().expect("simulated pools carry labels")),
        feasible: s.is_feasible(),
    }
}

type Apply = Box<dyn Fn(&Pool, &mut RandomSource) -> PoolOutcome + Send + Sync>;

/// A method fitted on one calibration set.
enum Fitted {
    Fixed(Apply, bool, String),
    PerPool(Apply, String),
}

fn fit(method: Method, cal: &CalibrationSet, p: &CellParams, variant: IsotonicVariant) -> Result<Fitted> {
    let cfg = GuaranteeConfig::new(p.k, p.m as f64, p.alpha)?;
    let k = p.k;
    Ok(match method {
        Method::Css => {
            let r = css_threshold(cal, &cfg);
            let summary = format!("threshold={}", r.threshold());
            Fitted::Fixed(Box::new(move |pool, rng| outcome(&r, pool, rng)), r.is_feasible(), summary)
        }
        Method::Umb(b) => {
            let edges = umb_edges(cal, b.min(cal.len()))?;
            let policy = multibin_policy(bin_deltas(cal, &edges)?, &cfg);
            let summary = format!("bins={} cutoff={} theta={}", edges.len() - 1, policy.cutoff_bin(), policy.last_bin_prob());
            let feasible = policy.is_feasible();
            Fitted::Fixed(Box::new(move |pool, rng| outcome(&policy, pool, rng)), feasible, summary)
        }
        Method::Uncalibrated => Fitted::PerPool(
            Box::new(move |pool, rng| match uncalibrated_rule(pool, k) {
                Ok(rule) => outcome(&rule, pool, rng),
                Err(_) => PoolOutcome::default(),
            }),
            "per-pool".into(),
        ),
        Method::Platt => {
            let model = platt_fit(cal)?;
            let summary = format!("a={} b={}", model.slope(), model.intercept());
            Fitted::PerPool(
                Box::new(move |pool, rng| match platt_rule(&model, pool, k) {
                    Ok(rule) => outcome(&rule, pool, rng),
                    Err(_) => PoolOutcome::default(),
                }),
                summary,
            )
        }
        Method::Isotonic => {
            let model = isotonic_fit(cal);
            let rule = isotonic_rule(&model, cal, p.k, p.m as f64, variant);
            let summary = format!("threshold={}", rule.policy.threshold());
            let feasible = rule.feasible;
            Fitted::Fixed(Box::new(move |pool, rng| outcome(&rule, pool, rng)), feasible, summary)
        }
        Method::CssDiv => return Err(HarnessError::Config("css-div runs in the diversity experiment".into())),
    })
}

/// Runs every configured method on one cell.
pub fn run_cell(cfg: &ExperimentConfig, sweep_index: usize, run_id: usize) -> Result<Vec<TrialReport>> {
    let values = cfg.sweep_values();
    let value = values[sweep_index];
    let p = cfg.params_at(value)?;
    let cell = sweep_index * cfg.runs + run_id;
    let world = NoisyClassifierWorld::new(p.r_noise)?;
    let cal = sample_calibration(&world, p.n_cal, &mut derive_stream(cfg.master_seed, stream_id(cell, CAL_SLOT)))?;
    let mut pool_rng = derive_stream(cfg.master_seed, stream_id(cell, POOL_SLOT));
    let pools = (0..cfg.test_pools).map(|_| sample_pool(&world, p.m, &mut pool_rng)).collect::<css_core::Result<Vec<Pool>>>()?;

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut rng = derive_stream(cfg.master_seed, stream_id(cell, method.stream_slot()));
        let report = match fit(method, &cal, &p, cfg.isotonic_variant) {
            Ok(fitted) => {
                let (apply, fixed_feasible, summary) = match fitted {
                    Fitted::Fixed(f, feasible, s) => (f, Some(feasible), s),
                    Fitted::PerPool(f, s) => (f, None, s),
                };
                if fixed_feasible == Some(false) && !matches!(method, Method::Isotonic) {
                    infeasible_report(method, value, run_id, summary)
                } else {
                    let (mut size, mut qual, mut all_feasible) = (0usize, 0usize, true);
                    for pool in &pools {
                        let o = apply(pool, &mut rng);
                        size += o.size;
                        qual += o.qualified;
                        all_feasible &= o.feasible;
                    }
                    let t = cfg.test_pools as f64;
                    let mean_qualified = qual as f64 / t;
                    TrialReport {
                        method,
                        sweep_value: value,
                        run_id,
                        eq: mean_qualified >= p.k,
                        ss: size as f64 / t,
                        feasible: all_feasible && fixed_feasible.unwrap_or(true),
                        mean_qualified,
                        policy: summary,
                    }
                }
            }
            Err(e) => infeasible_report(method, value, run_id, format!("error: {e}")),
        };
        out.push(report);
    }
    Ok(out)
}

fn infeasible_report(method: Method, sweep_value: f64, run_id: usize, policy: String) -> TrialReport {
    TrialReport { method, sweep_value, run_id, eq: false, ss: 0.0, feasible: false, mean_qualified: 0.0, policy }
}

/// A single run of one method.
pub fn run_trial(cfg: &ExperimentConfig, method: Method, sweep_index: usize, run_id: usize) -> Result<TrialReport> {
    let single = ExperimentConfig { methods: vec![method], ..cfg.clone() };
    Ok(run_cell(&single, sweep_index, run_id)?.remove(0))
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..cfg.sweep_values().len()).flat_map(|s| (0..cfg.runs).map(move |r| (s, r))).collect();
    let per_cell: Vec<Vec<TrialReport>> = if cfg.parallel {
        cells.par_iter().map(|&(s, r)| run_cell(cfg, s, r)).collect::<Result<_>>()?
    } else {
        cells.iter().map(|&(s, r)| run_cell(cfg, s, r)).collect::<Result<_>>()?
    };
    // Rows ordered by (sweep value, method, run).
    let mut trials = Vec::with_capacity(per_cell.len() * cfg.methods.len());
    for s in 0..cfg.sweep_values().len() {
        for mi in 0..cfg.methods.len() {
            trials.extend(per_cell[s * cfg.runs..(s + 1) * cfg.runs].iter().map(|cell| cell[mi].clone()));
        }
    }
    let aggregates = aggregate(&trials);
    Ok(ResultsTable { axis: cfg.sweep.as_ref().map(|s| s.axis), trials, aggregates })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Summaries of consecutive rows sharing (method, sweep value), in row order.
pub fn aggregate(trials: &[TrialReport]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < trials.len() {
        let (method, value) = (trials[i].method, trials[i].sweep_value);
        let mut j = i;
        while j < trials.len() && trials[j].method == method && trials[j].sweep_value.to_bits() == value.to_bits() {
            j += 1;
        }
        let group = &trials[i..j];
        let runs = group.len();
        let eq: Vec<f64> = group.iter().map(|t| f64::from(u8::from(t.eq))).collect();
        let (eq_mean, eq_sd) = mean_sd(&eq);
        let feasible: Vec<f64> = group.iter().filter(|t| t.feasible).map(|t| t.ss).collect();
        let (ss_mean, ss_sd, ss_se) = if feasible.is_empty() {
            (None, None, None)
        } else {
            let (m, sd) = mean_sd(&feasible);
            (Some(m), Some(sd), Some(sd / (feasible.len() as f64).sqrt()))
        };
        out.push(Aggregate {
            method,
            sweep_value: value,
            runs,
            eq_mean,
            eq_se: eq_sd / (runs as f64).sqrt(),
            feasible_rate: feasible.len() as f64 / runs as f64,
            n_feasible: feasible.len(),
            ss_mean,
            ss_sd,
            ss_se,
            mean_qualified: group.iter().map(|t| t.mean_qualified).sum::<f64>() / runs as f64,
        });
        i = j;
    }
    out
}

impl ResultsTable {
    pub fn aggregate_for(&self, method: Method, sweep_value: f64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.sweep_value == sweep_value)
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for a in &self.aggregates {
            if !out.contains(&a.method) {
                out.push(a.method);
            }
        }
        out
    }
}

pub const RESULTS_HEADER: [&str; 12] =
    ["method", "sweep_value", "run_id", "EQ", "SS", "feasible", "mean_qualified", "eq_se", "ss_sd", "ss_se", "n_feasible", "policy"];

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// Per-run rows of each (method, sweep value) group followed by its
/// aggregate row, whose `run_id` is `all`. Aggregate rows hold the EQ
/// fraction, the feasible fraction and shortlist-size statistics over
/// feasible runs (blank when there are none).
pub fn write_results<W: Write>(out: W, table: &ResultsTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| HarnessError::Config(format!("csv write: {e}"));
    w.write_record(RESULTS_HEADER).map_err(err)?;
    let mut start = 0;
    for a in &table.aggregates {
        for t in &table.trials[start..start + a.runs] {
            w.write_record([
                t.method.to_string(),
                fmt17(t.sweep_value),
                t.run_id.to_string(),
                u8::from(t.eq).to_string(),
                fmt17(t.ss),
                u8::from(t.feasible).to_string(),
                fmt17(t.mean_qualified),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                t.policy.clone(),
            ])
            .map_err(err)?;
        }
        start += a.runs;
        w.write_record([
            a.method.to_string(),
            fmt17(a.sweep_value),
            "all".to_string(),
            fmt17(a.eq_mean),
            opt(a.ss_mean),
            fmt17(a.feasible_rate),
            fmt17(a.mean_qualified),
            fmt17(a.eq_se),
            opt(a.ss_sd),
            opt(a.ss_se),
            a.n_feasible.to_string(),
            String::new(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::Config(format!("csv write: {e}")))?;
    Ok(())
}

pub fn emit_csv(table: &ResultsTable, path: &Path) -> Result<()> {
    let mut f = io::create(path)?;
    write_results(&mut f, table)?;
    f.flush().map_err(|e| HarnessError::io(path, e))
}

fn field(rec: &csv::StringRecord, i: usize) -> Result<&str> {
    rec.get(i).ok_or_else(|| HarnessError::Parse { line: line_no(rec), column: RESULTS_HEADER[i].to_string() })
}

fn line_no(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn real(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    field(rec, i)?.parse().map_err(|_| HarnessError::Parse { line: line_no(rec), column: RESULTS_HEADER[i].to_string() })
}

fn opt_real(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    if field(rec, i)?.is_empty() {
        Ok(None)
    } else {
        real(rec, i).map(Some)
    }
}

fn flag(rec: &csv::StringRecord, i: usize) -> Result<bool> {
    match field(rec, i)? {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(HarnessError::Parse { line: line_no(rec), column: RESULTS_HEADER[i].to_string() }),
    }
}

/// Inverse of [`write_results`].
pub fn parse_results<R: Read>(input: R) -> Result<ResultsTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let headers = rdr.headers().map_err(|_| HarnessError::MissingHeader("method".into()))?.clone();
    for (i, name) in RESULTS_HEADER.iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(HarnessError::MissingHeader(name.to_string()));
        }
    }
    let (mut trials, mut aggregates) = (Vec::new(), Vec::new());
    let mut runs = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| HarnessError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            column: "method".into(),
        })?;
        let method: Method =
            field(&rec, 0)?.parse().map_err(|_| HarnessError::Parse { line: line_no(&rec), column: "method".into() })?;
        let sweep_value = real(&rec, 1)?;
        if field(&rec, 2)? == "all" {
            let parse_err = || HarnessError::Parse { line: line_no(&rec), column: "n_feasible".into() };
            aggregates.push(Aggregate {
                method,
                sweep_value,
                runs,
                eq_mean: real(&rec, 3)?,
                eq_se: real(&rec, 7)?,
                feasible_rate: real(&rec, 5)?,
                n_feasible: field(&rec, 10)?.parse().map_err(|_| parse_err())?,
                ss_mean: opt_real(&rec, 4)?,
                ss_sd: opt_real(&rec, 8)?,
                ss_se: opt_real(&rec, 9)?,
                mean_qualified: real(&rec, 6)?,
            });
            runs = 0;
        } else {
            trials.push(TrialReport {
                method,
                sweep_value,
                run_id: field(&rec, 2)?
                    .parse()
                    .map_err(|_| HarnessError::Parse { line: line_no(&rec), column: "run_id".into() })?,
                eq: flag(&rec, 3)?,
                ss: real(&rec, 4)?,
                feasible: flag(&rec, 5)?,
                mean_qualified: real(&rec, 6)?,
                policy: field(&rec, 11)?.to_string(),
            });
            runs += 1;
        }
    }
    Ok(ResultsTable { axis: None, trials, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(parallel: bool) -> ExperimentConfig {
        ExperimentConfig {
            runs: 3,
            test_pools: 20,
            n_cal: 500,
            sweep: Some("noise=0,0.5".parse().unwrap()),
            parallel,
            master_seed: 11,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::standard().into_iter().chain([Method::CssDiv]) {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("umb-0".parse::<Method>().is_err());
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "n=100,1000".parse().unwrap();
        assert_eq!(s.axis, SweepAxis::NCal);
        assert_eq!(s.values, vec![100.0, 1000.0]);
        assert!("noise".parse::<Sweep>().is_err());
        assert!("depth=1".parse::<Sweep>().is_err());
        let empty: Sweep = "noise=".parse().unwrap();
        assert!(empty.values.is_empty());
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig { runs: 0, ..small(false) }.validate().is_err());
        assert!(ExperimentConfig { test_pools: 0, ..small(false) }.validate().is_err());
        assert!(ExperimentConfig { sweep: Some("noise=1.5".parse().unwrap()), ..small(false) }.validate().is_err());
        assert!(ExperimentConfig { sweep: Some("n=10.5".parse().unwrap()), ..small(false) }.validate().is_err());
        assert!(ExperimentConfig { methods: vec![Method::CssDiv], ..small(false) }.validate().is_err());
    }

    #[test]
    fn sweep_shape_and_order() {
        let t = run_sweep(&small(false)).unwrap();
        let methods = Method::standard().len();
        assert_eq!(t.trials.len(), 2 * methods * 3);
        assert_eq!(t.aggregates.len(), 2 * methods);
        assert!(t.trials.iter().all(|r| (0.0..=100.0).contains(&r.ss)));
        assert_eq!(t.trials[0].sweep_value, 0.0);
        assert_eq!(t.trials.last().unwrap().sweep_value, 0.5);
    }

    #[test]
    fn empty_sweep_is_one_cell() {
        let cfg = ExperimentConfig { sweep: Some("noise=".parse().unwrap()), r_noise: 0.3, ..small(false) };
        let t = run_sweep(&cfg).unwrap();
        assert_eq!(t.aggregates.len(), Method::standard().len());
        assert!(t.trials.iter().all(|r| r.sweep_value == 0.3));
    }

    #[test]
    fn serial_equals_parallel() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_results(&mut a, &run_sweep(&small(false)).unwrap()).unwrap();
        write_results(&mut b, &run_sweep(&small(true)).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn method_streams_are_independent_of_the_method_set() {
        let cfg = small(false);
        let all = run_cell(&cfg, 1, 2).unwrap();
        let alone = run_trial(&cfg, Method::Umb(5), 1, 2).unwrap();
        assert_eq!(all.iter().find(|r| r.method == Method::Umb(5)).unwrap(), &alone);
    }

    #[test]
    fn infeasible_css_row() {
        // 20 calibration points cannot support k = 50 of 100.
        let cfg = ExperimentConfig { k: 50.0, n_cal: 20, sweep: None, methods: vec![Method::Css, Method::Platt], ..small(false) };
        let t = run_sweep(&cfg).unwrap();
        let css = &t.trials[0];
        assert_eq!((css.eq, css.ss, css.feasible), (false, 0.0, false));
        let platt = t.trials.iter().find(|r| r.method == Method::Platt).unwrap();
        assert!(!platt.feasible);
        assert_eq!(platt.ss, 100.0);
        let agg = t.aggregate_for(Method::Css, 0.0).unwrap();
        assert_eq!((agg.n_feasible, agg.ss_mean), (0, None));
    }

    #[test]
    fn csv_round_trip_and_aggregates() {
        let table = run_sweep(&small(false)).unwrap();
        let mut bytes = Vec::new();
        write_results(&mut bytes, &table).unwrap();
        assert!(String::from_utf8_lossy(&bytes).starts_with("method,sweep_value,run_id,EQ,SS,feasible,"));
        let back = parse_results(bytes.as_slice()).unwrap();
        assert_eq!(back.trials, table.trials);
        assert_eq!(back.aggregates, table.aggregates);
        assert_eq!(aggregate(&back.trials), back.aggregates);
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut bytes = Vec::new();
        write_results(&mut bytes, &ResultsTable { axis: None, trials: vec![], aggregates: vec![] }).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap().trim_end(), RESULTS_HEADER.join(","));
    }
}
