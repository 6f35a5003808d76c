//! The oracle rules against independent brute-force optima.

use css_core::data::{DiscreteWorld, SupportPoint};
use css_core::policies::{calibrated_bins_rule, expected_qualified, expected_size, omniscient_rule, ScreeningPolicy};
use css_core::Error;
use proptest::prelude::*;

/// Greedy fractional knapsack: min sum p_i s.t. sum p_i q_i >= k, p in [0,1].
fn knapsack_min_size(q: &[f64], k: f64) -> Option<f64> {
    let mut sorted = q.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut got = 0.0;
    let mut size = 0.0;
    for &v in &sorted {
        if got >= k {
            break;
        }
        if v == 0.0 {
            continue;
        }
        let take = ((k - got) / v).min(1.0);
        got += take * v;
        size += take;
    }
    (got >= k - 1e-12).then_some(size)
}

fn grid(v: &[u32]) -> Vec<f64> {
    v.iter().map(|&i| f64::from(i) / 20.0).collect()
}

proptest! {
    #[test]
    fn omniscient_matches_knapsack(raw in prop::collection::vec(0u32..=20, 1..=8), u in 0.0f64..=1.0) {
        let q = grid(&raw);
        let total: f64 = q.iter().sum();
        let k = total * u;
        let policy = omniscient_rule(&q, k).unwrap();
        let size: f64 = q.iter().map(|&s| policy.selection_probability(s)).sum();
        let qualified: f64 = q.iter().map(|&s| s * policy.selection_probability(s)).sum();
        let best = knapsack_min_size(&q, k).unwrap();
        prop_assert!((size - best).abs() < 1e-12, "size {size} vs {best}");
        if k > 0.0 {
            prop_assert!((qualified - k).abs() < 1e-12, "qualified {qualified} vs {k}");
        }
    }

    #[test]
    fn omniscient_reports_deficit(raw in prop::collection::vec(0u32..=20, 1..=8), extra in 0.01f64..3.0) {
        let q = grid(&raw);
        let total: f64 = q.iter().sum();
        let deficit = matches!(omniscient_rule(&q, total + extra), Err(Error::Infeasible { .. }));
        prop_assert!(deficit);
    }
}

/// Minimum expected size over every (cut level, tie fraction) pair that
/// hits the target exactly.
fn enumerate_bins(mus: &[f64], rhos: &[f64], k: f64, m: f64) -> Option<f64> {
    let target = k / m;
    let mut best: Option<f64> = None;
    for &c in mus {
        let above: f64 = mus.iter().zip(rhos).filter(|(mu, _)| **mu > c).map(|(mu, r)| mu * r).sum();
        let tie: f64 = mus.iter().zip(rhos).filter(|(mu, _)| **mu == c).map(|(mu, r)| mu * r).sum();
        if tie <= 0.0 {
            continue;
        }
        let theta = (target - above) / tie;
        if !(-1e-12..=1.0 + 1e-12).contains(&theta) {
            continue;
        }
        let theta = theta.clamp(0.0, 1.0);
        let size_above: f64 = mus.iter().zip(rhos).filter(|(mu, _)| **mu > c).map(|(_, r)| r).sum();
        let size_tie: f64 = mus.iter().zip(rhos).filter(|(mu, _)| **mu == c).map(|(_, r)| r).sum();
        let size = m * (size_above + theta * size_tie);
        best = Some(best.map_or(size, |b: f64| b.min(size)));
    }
    best
}

fn world(mus: &[f64], rhos: &[f64]) -> DiscreteWorld {
    DiscreteWorld::new(mus.iter().zip(rhos).map(|(&s, &w)| SupportPoint::new(s, s, w)).collect()).unwrap()
}

fn bins_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((1u32..=20, 1u32..=10), 1..=6).prop_map(|v| {
        let total: u32 = v.iter().map(|p| p.1).sum();
        let mus = v.iter().map(|p| f64::from(p.0) / 20.0).collect();
        let rhos = v.iter().map(|p| f64::from(p.1) / f64::from(total)).collect();
        (mus, rhos)
    })
}

proptest! {
    #[test]
    fn calibrated_bins_matches_enumeration((mus, rhos) in bins_strategy(), u in 0.01f64..=1.0) {
        let m = 10.0;
        let total: f64 = mus.iter().zip(&rhos).map(|(a, b)| a * b).sum();
        let k = m * total * u;
        let policy = calibrated_bins_rule(&mus, &rhos, k, m).unwrap();
        let w = world(&mus, &rhos);
        let size = expected_size(&policy, &w, m).unwrap();
        let best = enumerate_bins(&mus, &rhos, k, m).unwrap();
        prop_assert!((size - best).abs() < 1e-12, "size {size} vs {best}");
        let qualified = expected_qualified(&policy, &w, m).unwrap();
        prop_assert!((qualified - k).abs() < 1e-12);
    }

    #[test]
    fn merging_bins_never_shrinks_shortlist((mus, rhos) in bins_strategy(), u in 0.01f64..=1.0, i in 0usize..6, j in 0usize..6) {
        let b = mus.len();
        prop_assume!(b >= 2);
        let (i, j) = (i % b, j % b);
        prop_assume!(i != j);
        let m = 10.0;
        let total: f64 = mus.iter().zip(&rhos).map(|(a, b)| a * b).sum();
        let k = m * total * u * 0.999;
        let fine = expected_size(&calibrated_bins_rule(&mus, &rhos, k, m).unwrap(), &world(&mus, &rhos), m).unwrap();

        let rho = rhos[i] + rhos[j];
        let mu = (mus[i] * rhos[i] + mus[j] * rhos[j]) / rho;
        let mut cmus = vec![mu];
        let mut crhos = vec![rho];
        for t in 0..b {
            if t != i && t != j {
                cmus.push(mus[t]);
                crhos.push(rhos[t]);
            }
        }
        let coarse_policy = calibrated_bins_rule(&cmus, &crhos, k, m).unwrap();
        let coarse = expected_size(&coarse_policy, &world(&cmus, &crhos), m).unwrap();
        prop_assert!(coarse >= fine - 1e-9, "coarse {coarse} < fine {fine}");
    }
}

#[test]
fn expected_size_on_uniform_world() {
    let q = [0.9, 0.8, 0.5, 0.3];
    let policy = omniscient_rule(&q, 2.0).unwrap();
    let w = DiscreteWorld::new(q.iter().map(|&s| SupportPoint::new(s, s, 0.25)).collect()).unwrap();
    assert!((expected_size(&policy, &w, 4.0).unwrap() - 2.6).abs() < 1e-12);
}
