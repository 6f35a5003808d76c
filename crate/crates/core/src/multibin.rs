//! Calibrated selection over score bins.
//!
//! Each bin's empirical qualified mass is within `2 * epsilon` of its true
//! mass, so whole bins are taken from the top down while the summed lower
//! bounds stay short of the target rate, and the bin that crosses it is
//! taken at random. Uniform-mass binning places edges at evenly spaced
//! order statistics of the calibration scores.

use alloc::vec::Vec;

use crate::bounds::{epsilon, BinModel};
use crate::error::{Error, Result};
use crate::policies::{BinRandomizedPolicy, ScreeningPolicy};
use crate::rng::RandomSource;
use crate::types::{CalibrationSet, GuaranteeConfig, Pool, Shortlist};

/// Edges for `bins` equal-count bins: interior edge `b` is the score of the
/// `ceil(b n / bins)`-th largest calibration example.
///
/// Edges that would repeat (tied scores) or coincide with 1 or 0 are
/// dropped, so fewer bins than requested may come back; the effective count
/// is `edges.len() - 1`.
pub fn umb_edges(cal: &CalibrationSet, bins: usize) -> Result<Vec<f64>> {
    let n = cal.len();
    if bins == 0 {
        return Err(Error::BadParams("need at least one bin"));
    }
    if bins > n {
        return Err(Error::TooManyBins { bins, n });
    }
    let mut edges = alloc::vec![1.0];
    for b in 1..bins {
        let rank = (b * n).div_ceil(bins);
        let t = cal.examples()[rank - 1].score;
        if t > 0.0 && t < *edges.last().expect("non-empty") {
            edges.push(t);
        }
    }
    edges.push(0.0);
    Ok(edges)
}

/// The randomized multi-bin rule.
///
/// Finds the first bin `b` (one-based, from the top) at which
/// `sum_{b' <= b} (delta_b' - 2 eps) >= k/m` and the fraction of that bin
/// needed to land exactly on the target. A fraction of exactly one moves to
/// the next bin with fraction zero when there is one. No such bin means the
/// rule is infeasible and selects nobody.
pub fn multibin_policy(bins: BinModel, cfg: &GuaranteeConfig) -> BinRandomizedPolicy {
    if cfg.k() == 0.0 {
        return BinRandomizedPolicy::new(bins, 1, 0.0).expect("bin 1 exists");
    }
    match multibin_cutoff(&bins, cfg) {
        Some((b, theta)) => BinRandomizedPolicy::new(bins, b, theta).expect("cutoff within range"),
        None => BinRandomizedPolicy::infeasible(bins),
    }
}

fn multibin_cutoff(bins: &BinModel, cfg: &GuaranteeConfig) -> Option<(usize, f64)> {
    let margin = 2.0 * epsilon(cfg.alpha(), bins.n()).expect("validated alpha and n");
    let target = cfg.target_rate();
    let mut sum = 0.0;
    for (i, &d) in bins.deltas().iter().enumerate() {
        let lower = d - margin;
        if sum + lower >= target {
            let theta = ((target - sum) / lower).clamp(0.0, 1.0);
            let b = i + 1;
            return Some(if theta >= 1.0 && b < bins.num_bins() { (b + 1, 0.0) } else { (b, theta) });
        }
        sum += lower;
    }
    None
}

/// The deterministic variant of the multi-bin rule: the lower edge of the
/// bin the randomized rule cuts in, selecting that bin whole.
pub fn multibin_deterministic_threshold(bins: &BinModel, cfg: &GuaranteeConfig) -> Option<f64> {
    if cfg.k() == 0.0 {
        return Some(bins.edges()[1]);
    }
    let margin = 2.0 * epsilon(cfg.alpha(), bins.n()).expect("validated alpha and n");
    let mut sum = 0.0;
    for (i, &d) in bins.deltas().iter().enumerate() {
        sum += d - margin;
        if sum >= cfg.target_rate() {
            return Some(bins.edges()[i + 1]);
        }
    }
    None
}

pub fn multibin_shortlist(policy: &BinRandomizedPolicy, pool: &Pool, rng: &mut RandomSource) -> Shortlist {
    policy.apply(pool, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::bin_deltas;
    use crate::rng::derive_stream;
    use crate::types::ScoredExample;
    use alloc::vec;

    fn cal(pairs: &[(f64, bool)]) -> CalibrationSet {
        CalibrationSet::new(pairs.iter().map(|&(s, y)| ScoredExample::new(s, y)).collect()).unwrap()
    }

    fn eight() -> CalibrationSet {
        let mut v: Vec<(f64, bool)> = [0.95, 0.9, 0.85, 0.8, 0.75, 0.7].iter().map(|&s| (s, true)).collect();
        v.extend([(0.3, false), (0.2, false)]);
        cal(&v)
    }

    #[test]
    fn umb_two_bins() {
        let c = eight();
        let edges = umb_edges(&c, 2).unwrap();
        assert_eq!(edges, vec![1.0, 0.8, 0.0]);
        assert_eq!(bin_deltas(&c, &edges).unwrap().counts(), &[4, 4]);
    }

    #[test]
    fn umb_degenerate_counts() {
        assert_eq!(umb_edges(&eight(), 1).unwrap(), vec![1.0, 0.0]);
        assert_eq!(umb_edges(&eight(), 20), Err(Error::TooManyBins { bins: 20, n: 8 }));
        let tied = cal(&[(0.5, true), (0.5, false), (0.5, true), (0.2, false)]);
        assert_eq!(umb_edges(&tied, 4).unwrap(), vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn infeasible_where_threshold_rule_is_not() {
        let c = eight();
        let bins = bin_deltas(&c, &[1.0, 0.5, 0.0]).unwrap();
        let cfg = GuaranteeConfig::new(1.0, 4.0, 0.5).unwrap();
        let p = multibin_policy(bins, &cfg);
        assert!(!p.is_feasible());
        assert!(crate::css::css_threshold(&c, &cfg).is_feasible());
    }

    #[test]
    fn single_bin_fraction() {
        // 900 positives out of 1000 in one bin: delta 0.9; alpha chosen so 2 eps = 0.1.
        let c = cal(&(0..1000).map(|i| (0.5, i < 900)).collect::<Vec<_>>());
        let alpha = 2.0 * libm::exp(-2.0 * 1000.0 * 0.05 * 0.05);
        let bins = bin_deltas(&c, &[1.0, 0.0]).unwrap();
        let cfg = GuaranteeConfig::new(4.0, 10.0, alpha).unwrap();
        let p = multibin_policy(bins, &cfg);
        assert_eq!(p.cutoff_bin(), 1);
        assert!((p.last_bin_prob() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_target_selects_nobody() {
        let bins = bin_deltas(&eight(), &[1.0, 0.5, 0.0]).unwrap();
        let p = multibin_policy(bins, &GuaranteeConfig::new(0.0, 4.0, 0.5).unwrap());
        assert_eq!((p.cutoff_bin(), p.last_bin_prob()), (1, 0.0));
        let pool = Pool::new(vec![0.9, 0.1]).unwrap();
        assert_eq!(multibin_shortlist(&p, &pool, &mut derive_stream(0, 0)).realized_size(), 0);
    }

    #[test]
    fn random_bin_frequency() {
        let c = cal(&(0..10).map(|i| (0.5, i < 9)).collect::<Vec<_>>());
        let bins = bin_deltas(&c, &[1.0, 0.0]).unwrap();
        let p = BinRandomizedPolicy::new(bins, 1, 0.5).unwrap();
        let pool = Pool::new(vec![0.6; 10_000]).unwrap();
        let s = multibin_shortlist(&p, &pool, &mut derive_stream(7, 0));
        let frac = s.realized_size() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn pool_below_cutoff_is_empty() {
        let bins = bin_deltas(&eight(), &[1.0, 0.5, 0.0]).unwrap();
        let p = BinRandomizedPolicy::new(bins, 1, 0.0).unwrap();
        let pool = Pool::new(vec![0.4, 0.1]).unwrap();
        assert_eq!(multibin_shortlist(&p, &pool, &mut derive_stream(0, 0)).realized_size(), 0);
    }
}
