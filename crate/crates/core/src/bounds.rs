//! Distribution-free bounds on qualified mass.
//!
//! `delta(t) = E[Y * 1{f(X) >= t}]` is the expected qualified mass a
//! threshold `t` keeps per candidate. Its empirical counterpart over `n`
//! calibration examples deviates from it by at most [`epsilon`] uniformly in
//! `t` with probability `1 - alpha` (the DKW inequality with Massart's
//! constant). Per-bin masses over intervals of scores are within twice that.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::CalibrationSet;

/// `sqrt(ln(2 / alpha) / (2 n))`, the uniform deviation bound.
pub fn epsilon(alpha: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if n == 0 {
        return Err(Error::InvalidN { n, min: 1 });
    }
    Ok(libm::sqrt(libm::log(2.0 / alpha) / (2.0 * n as f64)))
}

/// The empirical qualified-mass curve `t -> (1/n) * #{i : s_i >= t, y_i = 1}`.
///
/// Piecewise constant, left-open and right-closed between consecutive
/// distinct calibration scores, so its value on `(s_{j-1}, s_j]` is its value
/// at `s_j`. Counts are kept alongside the values so comparisons between
/// curves built from the same data stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCurve {
    /// Distinct calibration scores, ascending.
    breakpoints: Vec<f64>,
    /// Positives scoring at or above each breakpoint.
    counts: Vec<usize>,
    values: Vec<f64>,
    n: usize,
}

impl DeltaCurve {
    pub fn new(cal: &CalibrationSet) -> Self {
        let n = cal.len();
        let mut desc: Vec<(f64, usize)> = Vec::new();
        let mut positives = 0usize;
        for e in cal.examples() {
            positives += usize::from(e.label);
            match desc.last_mut() {
                Some((s, c)) if *s == e.score => *c = positives,
                _ => desc.push((e.score, positives)),
            }
        }
        desc.reverse();
        let breakpoints = desc.iter().map(|(s, _)| *s).collect();
        let counts: Vec<usize> = desc.iter().map(|(_, c)| *c).collect();
        let values = counts.iter().map(|&c| c as f64 / n as f64).collect();
        DeltaCurve { breakpoints, counts, values, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t = 0`: the positive rate of the calibration data.
    pub fn value_at_zero(&self) -> f64 {
        self.values[0]
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let j = self.breakpoints.partition_point(|&s| s < t);
        self.values.get(j).copied().unwrap_or(0.0)
    }

    /// Positive count behind [`DeltaCurve::value_at`].
    pub fn count_at(&self, t: f64) -> usize {
        let j = self.breakpoints.partition_point(|&s| s < t);
        self.counts.get(j).copied().unwrap_or(0)
    }

    /// `(score, value)` pairs from the largest score down.
    pub fn descending(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.iter().copied().zip(self.values.iter().copied()).rev()
    }
}

pub fn delta_curve(cal: &CalibrationSet) -> DeltaCurve {
    DeltaCurve::new(cal)
}

/// Empirical qualified mass per score bin.
///
/// `edges` run `1 = t_0 > t_1 > ... > t_B = 0`. Bin `b` (zero-based here)
/// holds scores in `[t_{b+1}, t_b)`, and the top bin also holds `1`: every
/// score joins the highest bin whose lower edge it reaches.
#[derive(Debug, Clone, PartialEq)]
pub struct BinModel {
    edges: Vec<f64>,
    deltas: Vec<f64>,
    counts: Vec<usize>,
    positive_counts: Vec<usize>,
    n: usize,
}

fn check_edges(edges: &[f64]) -> Result<()> {
    let ok = edges.len() >= 2
        && edges[0] == 1.0
        && edges[edges.len() - 1] == 0.0
        && edges.windows(2).all(|w| w[0] > w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::BadEdges)
    }
}

impl BinModel {
    pub fn new(cal: &CalibrationSet, edges: &[f64]) -> Result<Self> {
        check_edges(edges)?;
        let bins = edges.len() - 1;
        let mut counts = alloc::vec![0usize; bins];
        let mut positive_counts = alloc::vec![0usize; bins];
        for e in cal.examples() {
            let b = bin_index(edges, e.score);
            counts[b] += 1;
            positive_counts[b] += usize::from(e.label);
        }
        let n = cal.len();
        let deltas = positive_counts.iter().map(|&c| c as f64 / n as f64).collect();
        Ok(BinModel { edges: edges.to_vec(), deltas, counts, positive_counts, n })
    }

    pub fn num_bins(&self) -> usize {
        self.deltas.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Calibration examples per bin.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn positive_counts(&self) -> &[usize] {
        &self.positive_counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Zero-based bin of `score`.
    pub fn bin_of(&self, score: f64) -> usize {
        bin_index(&self.edges, score)
    }
}

fn bin_index(edges: &[f64], score: f64) -> usize {
    let bins = edges.len() - 1;
    (0..bins).find(|&b| score >= edges[b + 1]).unwrap_or(bins - 1)
}

pub fn bin_deltas(cal: &CalibrationSet, edges: &[f64]) -> Result<BinModel> {
    BinModel::new(cal, edges)
}

/// Lower bound on the realized qualified count of a single pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseBound {
    value: f64,
    admissible: bool,
}

impl WorstCaseBound {
    /// The bound exactly as the formula gives it; may be negative.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// The bound floored at zero, for reporting.
    pub fn clamped(&self) -> f64 {
        self.value.max(0.0)
    }

    /// Whether `alpha2 > exp(-9k/4)`, the range in which the bound is proven
    /// (and in which it increases with `k`).
    pub fn admissible(&self) -> bool {
        self.admissible
    }
}

/// `k - ln(1/a)/3 - sqrt(ln(1/a)^2 + 18 k ln(1/a)) / 3` with `a = alpha2`:
/// with probability `1 - alpha - alpha2`, a pool screened at target `k`
/// holds at least this many qualified candidates.
pub fn worst_case_bound(k: f64, alpha2: f64) -> Result<WorstCaseBound> {
    if !(alpha2 > 0.0 && alpha2 < 1.0) {
        return Err(Error::InvalidAlpha(alpha2));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidK(k));
    }
    let value = raw_bound(k, libm::log(1.0 / alpha2));
    let admissible = alpha2 > libm::exp(-2.25 * k);
    Ok(WorstCaseBound { value, admissible })
}

fn raw_bound(k: f64, log_inv: f64) -> f64 {
    k - log_inv / 3.0 - libm::sqrt(log_inv * log_inv + 18.0 * k * log_inv) / 3.0
}

/// The target `k` to run with so that the per-pool bound reaches `k_worst`.
///
/// Solves `worst_case_bound(k, alpha2) = k_worst` by bisection to an absolute
/// tolerance of `1e-9` and returns the upper end of the final bracket, so the
/// bound at the result is never below `k_worst`. The bound increases in `k`
/// for `k >= (4/9) ln(1/alpha2)` and stays negative below that, so the root is
/// unique.
pub fn solve_k_for_worst_case(k_worst: f64, alpha2: f64) -> Result<f64> {
    if !(alpha2 > 0.0 && alpha2 < 1.0) {
        return Err(Error::InvalidAlpha(alpha2));
    }
    if !(k_worst.is_finite() && k_worst >= 0.0) {
        return Err(Error::InvalidK(k_worst));
    }
    let log_inv = libm::log(1.0 / alpha2);
    let mut lo = k_worst.max(4.0 * log_inv / 9.0);
    if raw_bound(lo, log_inv) >= k_worst {
        return Ok(lo);
    }
    let mut hi = lo + 1.0;
    let mut doublings = 0;
    while raw_bound(hi, log_inv) < k_worst {
        hi = lo + 2.0 * (hi - lo);
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(Error::NoSolution);
        }
    }
    while hi - lo > 1e-9 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if raw_bound(mid, log_inv) >= k_worst {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ScoredExample;

    fn cal(pairs: &[(f64, bool)]) -> CalibrationSet {
        CalibrationSet::new(pairs.iter().map(|&(s, y)| ScoredExample::new(s, y)).collect()).unwrap()
    }

    fn eight() -> CalibrationSet {
        cal(&[
            (0.95, true),
            (0.9, true),
            (0.85, true),
            (0.8, true),
            (0.75, true),
            (0.7, true),
            (0.3, false),
            (0.2, false),
        ])
    }

    #[test]
    fn epsilon_values() {
        // high-precision evaluation of the closed form
        assert!((epsilon(0.1, 10_000).unwrap() - 0.012_238_734_153_404_08).abs() < 1e-6);
        assert!((epsilon(0.1, 200).unwrap() - 0.086_540_919_130_114_27).abs() < 1e-5);
        assert_eq!(epsilon(2.0, 100), Err(Error::InvalidAlpha(2.0)));
        assert_eq!(epsilon(0.1, 0), Err(Error::InvalidN { n: 0, min: 1 }));
    }

    #[test]
    fn delta_curve_queries() {
        let c = delta_curve(&cal(&[(0.9, true), (0.8, false), (0.6, true), (0.2, false)]));
        assert_eq!(c.value_at(0.5), 0.5);
        assert_eq!(c.value_at(0.7), 0.25);
        assert_eq!(c.value_at(0.95), 0.0);
        assert_eq!(c.value_at(0.0), 0.5);
        assert_eq!(c.value_at_zero(), 0.5);
        // right-closed at a breakpoint
        assert_eq!(c.value_at(0.6), 0.5);
        assert_eq!(c.value_at(0.9), 0.25);
    }

    #[test]
    fn delta_curve_merges_tied_scores() {
        let c = delta_curve(&cal(&[(0.5, true), (0.5, false), (0.5, true), (0.1, true)]));
        assert_eq!(c.breakpoints(), &[0.1, 0.5]);
        assert_eq!(c.value_at(0.5), 0.5);
        assert_eq!(c.value_at(0.3), 0.5);
        assert_eq!(c.value_at(0.1), 0.75);
    }

    #[test]
    fn bin_deltas_counts() {
        let m = bin_deltas(&eight(), &[1.0, 0.5, 0.0]).unwrap();
        assert_eq!(m.deltas(), &[0.75, 0.0]);
        assert_eq!(m.counts(), &[6, 2]);
        let one = bin_deltas(&eight(), &[1.0, 0.0]).unwrap();
        assert_eq!(one.deltas(), &[0.75]);
        assert_eq!(bin_deltas(&eight(), &[1.0, 0.5, 0.6, 0.0]), Err(Error::BadEdges));
        assert_eq!(bin_deltas(&eight(), &[0.9, 0.0]), Err(Error::BadEdges));
        assert_eq!(bin_deltas(&eight(), &[1.0]), Err(Error::BadEdges));
    }

    #[test]
    fn bin_membership_boundaries() {
        let c = cal(&[(1.0, true), (0.5, true), (0.0, false)]);
        let m = bin_deltas(&c, &[1.0, 0.5, 0.0]).unwrap();
        assert_eq!(m.counts(), &[2, 1]);
        assert_eq!(m.bin_of(1.0), 0);
        assert_eq!(m.bin_of(0.5), 0);
        assert_eq!(m.bin_of(0.4999), 1);
        assert_eq!(m.bin_of(0.0), 1);
    }

    #[test]
    fn worst_case_values() {
        let b = worst_case_bound(5.0, 0.1).unwrap();
        assert!((b.value() - (-0.627_050_019_802_554_7)).abs() < 1e-3);
        assert_eq!(b.clamped(), 0.0);
        assert!(b.admissible());
        let big = worst_case_bound(100.0, 0.1).unwrap();
        assert!((big.value() - 77.759_090_011_228_07).abs() < 1e-6);
        let near_one = worst_case_bound(7.0, 1.0 - 1e-12).unwrap();
        assert!((near_one.value() - 7.0).abs() < 1e-4);
        assert!(!worst_case_bound(0.1, 0.5).unwrap().admissible());
        assert_eq!(worst_case_bound(5.0, 0.0), Err(Error::InvalidAlpha(0.0)));
    }

    #[test]
    fn solve_k_round_trips() {
        let k0 = solve_k_for_worst_case(0.0, 0.1).unwrap();
        let v0 = worst_case_bound(k0, 0.1).unwrap().value();
        assert!((0.0..=1e-6).contains(&v0), "bound at solution = {v0}");
        assert!((k0 - 6.140_226_914_650_788).abs() < 1e-8);

        let k5 = solve_k_for_worst_case(5.0, 0.1).unwrap();
        let v5 = worst_case_bound(k5, 0.1).unwrap().value();
        assert!((5.0..=5.0 + 1e-6).contains(&v5));
        assert!((k5 - 13.766_730_661_490_594).abs() < 1e-8);

        let near = solve_k_for_worst_case(3.0, 1.0 - 1e-12).unwrap();
        assert!((near - 3.0).abs() < 1e-4);
    }

    #[test]
    fn bin_sum_matches_curve_at_zero() {
        let c = eight();
        let m = bin_deltas(&c, &[1.0, 0.9, 0.72, 0.25, 0.0]).unwrap();
        let total: usize = m.positive_counts().iter().sum();
        assert_eq!(total, delta_curve(&c).count_at(0.0));
        assert_eq!(m.counts().iter().sum::<usize>(), c.len());
    }
}
