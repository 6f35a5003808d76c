use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::{score_in_range, CalibrationSet, GroupId, Membership, Pool, ScoredExample};

/// A data-generating process for `(score, label, group)` triples whose
/// qualified-mass curve is known in closed form.
pub trait World {
    fn draw(&self, rng: &mut RandomSource) -> ScoredExample;

    /// `E[Y * 1{score >= t}]`.
    fn true_delta(&self, t: f64) -> f64;

    /// `P(score >= t)`.
    fn tail_mass(&self, t: f64) -> f64;

    fn qualified_rate(&self) -> f64 {
        self.true_delta(0.0)
    }
}

pub fn sample_calibration(world: &impl World, n: usize, rng: &mut RandomSource) -> Result<CalibrationSet> {
    if n == 0 {
        return Err(Error::InvalidN { n, min: 1 });
    }
    CalibrationSet::new((0..n).map(|_| world.draw(rng)).collect())
}

/// A pool of `m` candidates, labels included (for evaluation only).
pub fn sample_pool(world: &impl World, m: usize, rng: &mut RandomSource) -> Result<Pool> {
    if m == 0 {
        return Err(Error::InvalidN { n: m, min: 1 });
    }
    let draws: Vec<ScoredExample> = (0..m).map(|_| world.draw(rng)).collect();
    Pool::from_examples(&draws)
}

pub fn true_delta(world: &impl World, t: f64) -> f64 {
    world.true_delta(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportPoint {
    pub score: f64,
    pub qualified_prob: f64,
    pub weight: f64,
    pub group: Option<GroupId>,
}

impl SupportPoint {
    pub fn new(score: f64, qualified_prob: f64, weight: f64) -> Self {
        SupportPoint { score, qualified_prob, weight, group: None }
    }
}

/// A finite score distribution: score `s_j` occurs with probability `w_j` and
/// carries a qualified probability `q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWorld {
    support: Vec<SupportPoint>,
    cumulative: Vec<f64>,
}

impl DiscreteWorld {
    pub fn new(support: Vec<SupportPoint>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = support.iter().position(|p| !score_in_range(p.score)) {
            return Err(Error::ScoreOutOfRange(i));
        }
        if let Some(p) = support.iter().find(|p| !(0.0..=1.0).contains(&p.qualified_prob)) {
            return Err(Error::ProbabilityOutOfRange(p.qualified_prob));
        }
        if support.iter().any(|p| !(p.weight.is_finite() && p.weight >= 0.0)) {
            return Err(Error::BadDistribution);
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = support
            .iter()
            .map(|p| {
                acc += p.weight;
                acc
            })
            .collect();
        if (acc - 1.0).abs() > 1e-12 {
            return Err(Error::BadDistribution);
        }
        Ok(DiscreteWorld { support, cumulative })
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }
}

impl World for DiscreteWorld {
    fn draw(&self, rng: &mut RandomSource) -> ScoredExample {
        let u = rng.uniform();
        let j = self.cumulative.partition_point(|&c| c <= u).min(self.support.len() - 1);
        let p = &self.support[j];
        let label = rng.bernoulli(p.qualified_prob);
        ScoredExample {
            score: p.score,
            label,
            groups: p.group.clone().map(Membership::single).unwrap_or_default(),
        }
    }

    fn true_delta(&self, t: f64) -> f64 {
        self.support.iter().filter(|p| p.score >= t).map(|p| p.weight * p.qualified_prob).sum()
    }

    fn tail_mass(&self, t: f64) -> f64 {
        self.support.iter().filter(|p| p.score >= t).map(|p| p.weight).sum()
    }
}

/// Inverse-CDF draw from Beta(1, 4): `1 - u^(1/4)`.
pub fn beta14(u: f64) -> f64 {
    1.0 - libm::sqrt(libm::sqrt(u))
}

/// A classifier whose predictions are replaced by Beta(1, 4) noise with
/// probability `r_noise`.
///
/// Each candidate has a latent qualification probability `p ~ Beta(1, 4)`
/// (mean 1/5) and label `Y ~ Bernoulli(p)`. The noise-free classifier outputs
/// `p` itself, so it is perfectly calibrated; the observed score is
/// `g * b + (1 - g) * p` with `g ~ Bernoulli(r_noise)` and an independent
/// `b ~ Beta(1, 4)`.
///
/// Each draw consumes exactly four uniforms: `p`, `g`, `b`, then the label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyClassifierWorld {
    r_noise: f64,
}

impl NoisyClassifierWorld {
    pub fn new(r_noise: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r_noise) {
            return Err(Error::BadParams("noise ratio must lie in [0, 1]"));
        }
        Ok(NoisyClassifierWorld { r_noise })
    }

    pub fn r_noise(&self) -> f64 {
        self.r_noise
    }

    fn draw_parts(&self, rng: &mut RandomSource) -> (f64, bool) {
        let p = beta14(rng.uniform());
        let noisy = rng.bernoulli(self.r_noise);
        let b = beta14(rng.uniform());
        let label = rng.bernoulli(p);
        (if noisy { b } else { p }, label)
    }
}

fn tail4(t: f64) -> f64 {
    let c = 1.0 - t.clamp(0.0, 1.0);
    let c2 = c * c;
    c2 * c2
}

impl World for NoisyClassifierWorld {
    fn draw(&self, rng: &mut RandomSource) -> ScoredExample {
        let (score, label) = self.draw_parts(rng);
        ScoredExample::new(score, label)
    }

    // Noise replaces the score by an independent Beta(1, 4) draw, so a noisy
    // candidate contributes E[p] * P(b >= t) = 0.2 (1 - t)^4, and a clean one
    // E[p 1{p >= t}] = (1 - t)^4 - 0.8 (1 - t)^5.
    fn true_delta(&self, t: f64) -> f64 {
        if t > 1.0 {
            return 0.0;
        }
        let c = 1.0 - t.clamp(0.0, 1.0);
        let c4 = tail4(t);
        self.r_noise * 0.2 * c4 + (1.0 - self.r_noise) * (c4 - 0.8 * c4 * c)
    }

    fn tail_mass(&self, t: f64) -> f64 {
        if t > 1.0 {
            0.0
        } else {
            tail4(t)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub id: GroupId,
    /// Fraction of the population in this group.
    pub share: f64,
    pub r_noise: f64,
}

/// Disjoint groups, each a [`NoisyClassifierWorld`] with its own noise ratio.
///
/// Each draw consumes one uniform for the group followed by the four of the
/// group's world.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedNoisyWorld {
    groups: Vec<(GroupSpec, NoisyClassifierWorld)>,
    cumulative: Vec<f64>,
}

impl GroupedNoisyWorld {
    pub fn new(specs: Vec<GroupSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(specs.len());
        let mut groups = Vec::with_capacity(specs.len());
        for s in specs {
            if !(s.share.is_finite() && s.share >= 0.0) {
                return Err(Error::BadDistribution);
            }
            acc += s.share;
            cumulative.push(acc);
            let w = NoisyClassifierWorld::new(s.r_noise)?;
            groups.push((s, w));
        }
        if (acc - 1.0).abs() > 1e-12 {
            return Err(Error::BadDistribution);
        }
        let mut ids: Vec<&GroupId> = groups.iter().map(|(s, _)| &s.id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::BadParams("duplicate group id"));
        }
        Ok(GroupedNoisyWorld { groups, cumulative })
    }

    pub fn specs(&self) -> impl Iterator<Item = &GroupSpec> {
        self.groups.iter().map(|(s, _)| s)
    }

    fn find(&self, group: &GroupId) -> Result<(&GroupSpec, &NoisyClassifierWorld)> {
        self.groups
            .iter()
            .find(|(s, _)| &s.id == group)
            .map(|(s, w)| (s, w))
            .ok_or_else(|| Error::UnknownGroup(group.clone()))
    }

    /// `E[Y * 1{score >= t, X in group}]`.
    pub fn group_delta(&self, group: &GroupId, t: f64) -> Result<f64> {
        let (spec, w) = self.find(group)?;
        Ok(spec.share * w.true_delta(t))
    }

    /// `P(score >= t, X in group)`.
    pub fn group_tail_mass(&self, group: &GroupId, t: f64) -> Result<f64> {
        let (spec, w) = self.find(group)?;
        Ok(spec.share * w.tail_mass(t))
    }

    pub fn share(&self, group: &GroupId) -> Result<f64> {
        Ok(self.find(group)?.0.share)
    }
}

impl World for GroupedNoisyWorld {
    fn draw(&self, rng: &mut RandomSource) -> ScoredExample {
        let u = rng.uniform();
        let j = self.cumulative.partition_point(|&c| c <= u).min(self.groups.len() - 1);
        let (spec, w) = &self.groups[j];
        let (score, label) = w.draw_parts(rng);
        ScoredExample::with_group(score, label, spec.id.clone())
    }

    fn true_delta(&self, t: f64) -> f64 {
        self.groups.iter().map(|(s, w)| s.share * w.true_delta(t)).sum()
    }

    fn tail_mass(&self, t: f64) -> f64 {
        self.groups.iter().map(|(s, w)| s.share * w.tail_mass(t)).sum()
    }
}
