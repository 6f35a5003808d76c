use alloc::vec;

use crate::error::{Error, Result};
use crate::policies::{calibrated_bins_rule, omniscient_rule, RandomizedTiePolicy, ScreeningPolicy};
use crate::types::Pool;

use super::world::{DiscreteWorld, SupportPoint};

/// The two-type world `{a, b}` with `q_a = 1`, `q_b = k/m` and equal weights,
/// together with the two pools (all `a`, all `b`) on which no marginally
/// calibrated predictor can match the omniscient rule.
///
/// Both pools carry the omniscient scores. A marginally calibrated constant
/// predictor instead scores everyone at the population rate
/// `(1 + k/m) / 2`, so it cannot tell the pools apart.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpossibilityDemo {
    k: f64,
    m: usize,
    world: DiscreteWorld,
    pool_a: Pool,
    pool_b: Pool,
}

/// Size and qualified-count gaps between a policy and the omniscient rule on
/// the two pools, as expectations over the policy's randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolGaps {
    pub size: [f64; 2],
    pub quality: [f64; 2],
}

impl PoolGaps {
    pub fn max_size(&self) -> f64 {
        self.size[0].max(self.size[1])
    }

    pub fn max_quality(&self) -> f64 {
        self.quality[0].max(self.quality[1])
    }
}

pub fn impossibility_world(k: f64, m: usize) -> Result<ImpossibilityDemo> {
    let mf = m as f64;
    if !(k.is_finite() && k > 0.0 && k < mf) {
        return Err(Error::BadParams("need 0 < k < m"));
    }
    let qb = k / mf;
    let world = DiscreteWorld::new(vec![SupportPoint::new(1.0, 1.0, 0.5), SupportPoint::new(qb, qb, 0.5)])?;
    let pool_a = Pool::new(vec![1.0; m])?.with_labels(vec![true; m])?;
    let pool_b = Pool::new(vec![qb; m])?;
    Ok(ImpossibilityDemo { k, m, world, pool_a, pool_b })
}

impl ImpossibilityDemo {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn world(&self) -> &DiscreteWorld {
        &self.world
    }

    /// The all-`a` pool (index 0) and the all-`b` pool (index 1).
    pub fn pools(&self) -> [&Pool; 2] {
        [&self.pool_a, &self.pool_b]
    }

    /// Lower bound on the worse of the two size gaps: `(m - k) / 2`.
    pub fn size_gap_bound(&self) -> f64 {
        (self.m as f64 - self.k) / 2.0
    }

    /// Lower bound on the worse of the two quality gaps: `(k/2)(1 - k/m)`.
    pub fn quality_gap_bound(&self) -> f64 {
        let m = self.m as f64;
        self.k * (m - self.k) / (2.0 * m)
    }

    /// The score every candidate receives from the marginally calibrated
    /// constant predictor.
    pub fn constant_score(&self) -> f64 {
        (1.0 + self.k / self.m as f64) / 2.0
    }

    /// The calibrated-bins rule for the constant predictor: one bin at
    /// [`constant_score`](Self::constant_score) with all the mass.
    pub fn constant_policy(&self) -> Result<RandomizedTiePolicy> {
        calibrated_bins_rule(&[self.constant_score()], &[1.0], self.k, self.m as f64)
    }

    /// Expected (size, qualified) of the omniscient rule on each pool.
    pub fn oracle_outcomes(&self) -> Result<[(f64, f64); 2]> {
        let mut out = [(0.0, 0.0); 2];
        for (slot, pool) in out.iter_mut().zip(self.pools()) {
            let policy = omniscient_rule(pool.scores(), self.k)?;
            *slot = outcome(&policy, pool.scores(), pool.scores());
        }
        Ok(out)
    }

    /// Gaps of `policy`, which sees every candidate at the constant score,
    /// against the omniscient rule on each pool.
    pub fn gaps(&self, policy: &impl ScreeningPolicy) -> Result<PoolGaps> {
        let oracle = self.oracle_outcomes()?;
        let c = self.constant_score();
        let mut gaps = PoolGaps { size: [0.0; 2], quality: [0.0; 2] };
        for (i, pool) in self.pools().into_iter().enumerate() {
            let seen = vec![c; pool.len()];
            let (size, qualified) = outcome(policy, &seen, pool.scores());
            gaps.size[i] = (size - oracle[i].0).abs();
            gaps.quality[i] = (qualified - oracle[i].1).abs();
        }
        Ok(gaps)
    }
}

/// Expected size and qualified count when `policy` sees `seen` and the true
/// qualification probabilities are `truth`.
fn outcome(policy: &impl ScreeningPolicy, seen: &[f64], truth: &[f64]) -> (f64, f64) {
    seen.iter().zip(truth).fold((0.0, 0.0), |(size, qual), (&s, &q)| {
        let p = policy.selection_probability(s);
        (size + p, qual + p * q)
    })
}
