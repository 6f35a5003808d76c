#![allow(dead_code)]

use css_core::data::{DiscreteWorld, SupportPoint};
use css_core::{CalibrationSet, ScoredExample};

/// Scores 0.95, 0.85, ..., 0.05, each perfectly calibrated, with most of the
/// mass on low scores so the qualified-mass curve has fine steps.
pub fn ten_point_world() -> DiscreteWorld {
    let weights = [0.02, 0.025, 0.025, 0.03, 0.035, 0.045, 0.06, 0.2, 0.26, 0.3];
    DiscreteWorld::new(
        weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let s = (19 - 2 * i) as f64 / 20.0;
                SupportPoint::new(s, s, w)
            })
            .collect(),
    )
    .unwrap()
}

pub fn cal(pairs: &[(f64, bool)]) -> CalibrationSet {
    CalibrationSet::new(pairs.iter().map(|&(s, y)| ScoredExample::new(s, y)).collect()).unwrap()
}

/// Calibration data on a 0.05 grid, as (score index, label) pairs.
pub fn grid_cal(raw: &[(u32, bool)]) -> CalibrationSet {
    cal(&raw.iter().map(|&(i, y)| (f64::from(i) / 20.0, y)).collect::<Vec<_>>())
}
