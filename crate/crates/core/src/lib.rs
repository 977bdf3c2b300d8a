//! Bandit optimization of Hölder-smooth reward functions on `[0,1]^d`.
//!
//! The library implements a two-layer scheme: the domain is tiled with
//! equal-sized bins, each bin runs a misspecified linear UCB over a local
//! polynomial feature map, and a meta layer (UCB over bins, or a Corral
//! master over smoothed bases) decides which bin advances each round.
//! Smoothness adaptation over an unknown Hölder exponent is handled by a
//! Corral master over a grid of candidate exponents.
//!
//! The crate ships with a synthetic testbed of reward functions with
//! certified optima, a fixed-discretization UCB1 baseline, and an
//! experiment harness that records pseudo-regret traces, fits empirical
//! regret exponents on log-log scale, and emits deterministic CSV.
//!
//! All randomness flows through seeded ChaCha streams; identical configs
//! produce byte-identical outputs.

pub mod baselines;
pub mod config;
pub mod corral;
pub mod features;
pub mod harness;
pub mod linalg;
pub mod linucb;
pub mod meta;
pub mod testbed;
pub mod trace;

use thiserror::Error;

/// Seeded RNG used for every stochastic component. ChaCha8 keeps streams
/// reproducible across platforms and releases.
pub type RunRng = rand_chacha::ChaCha8Rng;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid smoothness exponent alpha={0}: must satisfy {1}")]
    BadAlpha(f64, &'static str),

    #[error("point {0:?} outside the domain [0,1]^{1}")]
    OutOfDomain(Vec<f64>, usize),

    #[error("point lies outside the bin (local coordinate {0} not in [-1/2, 1/2])")]
    OutOfBin(f64),

    #[error("invalid amplitude: {0}")]
    BadAmplitude(String),

    #[error("resolution {resolution} too coarse: certificate error bound {bound} exceeds 0.1")]
    ResolutionTooCoarse { resolution: f64, bound: f64 },

    #[error("horizon {horizon} smaller than the number of bins {bins}")]
    HorizonTooSmall { horizon: usize, bins: usize },

    #[error("feature dimension overflow for d={d}, degree={degree}")]
    FeatureDimOverflow { d: usize, degree: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("rate fit needs at least 3 points with positive mean regret, got {0}")]
    NotEnoughPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
