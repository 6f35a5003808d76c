//! Experiment harness for calibrated candidate screening: CSV and model IO,
//! Monte-Carlo sweeps, the diversity experiment and SVG plots.

pub mod diversity_exp;
pub mod error;
pub mod experiment;
pub mod io;
pub mod svg;

pub use error::{HarnessError, Result};
