//! Calibrated subset selection.
//!
//! Screening policies that take the scores of any classifier, a set of
//! held-out calibration examples, and a target `k`, and return the smallest
//! threshold shortlist whose expected number of qualified candidates is at
//! least `k` with probability at least `1 - alpha` over the calibration
//! draw. No assumption is made about the score distribution or about how
//! well the classifier is calibrated.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File
//! formats, the experiment harness and the command line tool live in the
//! companion `css-harness` crate.
//!
//! Module map:
//!
//! - [`types`]: scored examples, calibration sets, pools, shortlists and the
//!   guarantee contract.
//! - [`rng`]: the counter-based random source every randomized step draws from.
//! - [`bounds`]: the uniform deviation bound, empirical qualified-mass curves,
//!   per-bin masses and the worst-case (per-pool) bound.
//! - [`policies`]: policy shapes, the two oracle rules and analytic expectations.
//! - [`css`]: the calibrated threshold (fixed and expected pool size).
//! - [`multibin`]: uniform-mass binning and the randomized multi-bin rule.
//! - [`diversity`]: per-group calibrated selection.
//! - [`baselines`]: uncalibrated, Platt and isotonic baselines.
//! - [`data`]: synthetic worlds with analytic truth and a logistic trainer.
#![no_std]

extern crate alloc;

pub mod baselines;
pub mod bounds;
pub mod css;
pub mod data;
pub mod diversity;
mod error;
pub mod multibin;
pub mod policies;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use rng::{derive_stream, RandomSource, StreamPosition};
pub use types::{
    CalibrationSet, GroupId, GuaranteeConfig, Membership, Pool, ScoredExample, Shortlist,
};
