//! Synthetic worlds with analytically known truth, and a small logistic
//! regression trainer for feature data.

mod impossibility;
mod logistic;
mod world;

pub use impossibility::{impossibility_world, ImpossibilityDemo, PoolGaps};
pub use logistic::{train_logistic, LabeledRow, LogisticModel, TrainConfig};
pub use world::{
    beta14, sample_calibration, sample_pool, true_delta, DiscreteWorld, GroupSpec, GroupedNoisyWorld,
    NoisyClassifierWorld, SupportPoint, World,
};
