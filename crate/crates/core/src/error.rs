use core::fmt;

use crate::types::GroupId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operation that needs at least one example received none.
    EmptyInput,
    /// The score at this (input order) index is outside `[0, 1]` or not finite.
    ScoreOutOfRange(usize),
    InvalidAlpha(f64),
    /// Sample size out of range (`n` must be at least the stated minimum).
    InvalidN { n: usize, min: usize },
    InvalidK(f64),
    InvalidPoolSize(f64),
    /// `k` larger than the pool size makes every policy infeasible.
    KExceedsPoolSize { k: f64, pool_size: f64 },
    /// Parallel lists of different lengths.
    LengthMismatch { expected: usize, found: usize },
    /// Bin edges not strictly descending from 1 to 0.
    BadEdges,
    /// The available qualified probability mass cannot reach the target.
    Infeasible { total_mass: f64 },
    /// Bin weights are negative or do not sum to one.
    BadDistribution,
    SupportMismatch,
    NoSolution,
    TooManyBins { bins: usize, n: usize },
    UnknownGroup(GroupId),
    EmptyGroupCalibration(GroupId),
    ZeroMass,
    BadParams(&'static str),
    DimensionMismatch { row: usize, expected: usize, found: usize },
    /// A probability argument outside `[0, 1]`.
    ProbabilityOutOfRange(f64),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput => write!(f, "empty input"),
            Error::ScoreOutOfRange(i) => write!(f, "score at index {i} is outside [0, 1]"),
            Error::InvalidAlpha(a) => write!(f, "alpha must lie in (0, 1), got {a}"),
            Error::InvalidN { n, min } => write!(f, "sample size {n} is below the minimum {min}"),
            Error::InvalidK(k) => write!(f, "k must be finite and non-negative, got {k}"),
            Error::InvalidPoolSize(m) => write!(f, "pool size must be positive, got {m}"),
            Error::KExceedsPoolSize { k, pool_size } => {
                write!(f, "k = {k} exceeds the pool size {pool_size}")
            }
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::BadEdges => write!(f, "bin edges must descend strictly from 1 to 0"),
            Error::Infeasible { total_mass } => {
                write!(f, "infeasible: total qualified mass is only {total_mass}")
            }
            Error::BadDistribution => write!(f, "bin weights are not a probability distribution"),
            Error::SupportMismatch => write!(f, "policy and world use different score supports"),
            Error::NoSolution => write!(f, "no solution found"),
            Error::TooManyBins { bins, n } => {
                write!(f, "cannot form {bins} bins from {n} calibration examples")
            }
            Error::UnknownGroup(g) => write!(f, "group {g} is not in the plan"),
            Error::EmptyGroupCalibration(g) => write!(f, "group {g} has no calibration data"),
            Error::ZeroMass => write!(f, "all group masses are zero"),
            Error::BadParams(msg) => write!(f, "bad parameters: {msg}"),
            Error::DimensionMismatch { row, expected, found } => write!(
                f,
                "row {row} has {found} features, expected {expected}"
            ),
            Error::ProbabilityOutOfRange(p) => write!(f, "probability {p} is outside [0, 1]"),
        }
    }
}

impl core::error::Error for Error {}
