//! Fixed-discretization baseline: UCB1 over bins with uniform random
//! sampling inside the chosen bin.
//!
//! This is the reference method that treats the reward as merely Lipschitz:
//! the bin count comes from the alpha = 1 schedule regardless of the true
//! smoothness, and bins are only ever sampled uniformly at random. The meta
//! layer should beat its regret rate exactly when the function is smoother
//! than Lipschitz.

use rand::Rng;

use crate::meta::{num_bins, BinGrid};
use crate::testbed::{HolderFunction, RewardSource};
use crate::trace::{RegretTrace, TraceMeta};
use crate::{Error, Result, RunRng};

/// UCB1 state over a fixed bin grid.
#[derive(Debug, Clone)]
pub struct Ucb1State {
    grid: BinGrid,
    counts: Vec<usize>,
    means: Vec<f64>,
    init_cursor: usize,
    t: usize,
}

/// One consumed oracle call.
#[derive(Debug, Clone)]
pub struct Ucb1Step {
    pub bin: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

impl Ucb1State {
    /// Grid from the alpha = 1 bin schedule; needs at least one pull per bin.
    pub fn new(horizon: usize, d: usize) -> Result<Self> {
        let (_, m) = num_bins(horizon, d, 1.0);
        let grid = BinGrid::new(d, m);
        if horizon < grid.n_bins() {
            return Err(Error::HorizonTooSmall { horizon, bins: grid.n_bins() });
        }
        let n = grid.n_bins();
        Ok(Self { grid, counts: vec![0; n], means: vec![0.0; n], init_cursor: 0, t: 0 })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Index value `mean_k + sqrt(2 ln t / count_k)` of one bin.
    pub fn index(&self, k: usize) -> f64 {
        self.means[k] + (2.0 * (self.t as f64).ln() / self.counts[k] as f64).sqrt()
    }

    fn sample_in_bin(&self, k: usize, rng: &mut RunRng) -> Vec<f64> {
        let side = self.grid.side();
        self.grid
            .center(k)
            .iter()
            .map(|&c| c + side * (rng.random::<f64>() - 0.5))
            .collect()
    }

    /// One oracle call: init sweep first (one uniform pull per bin in
    /// canonical order), then the argmax of the index, ties to the lowest
    /// bin.
    pub fn advance(&mut self, source: &mut dyn RewardSource, rng: &mut RunRng) -> Ucb1Step {
        let k = if self.init_cursor < self.counts.len() {
            let k = self.init_cursor;
            self.init_cursor += 1;
            k
        } else {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for k in 0..self.counts.len() {
                let val = self.index(k);
                if val > best_val {
                    best_val = val;
                    best = k;
                }
            }
            best
        };
        let x = self.sample_in_bin(k, rng);
        let y = source.query(&x);
        self.counts[k] += 1;
        self.t += 1;
        self.means[k] += (y - self.means[k]) / self.counts[k] as f64;
        Ucb1Step { bin: k, x, y }
    }
}

/// Full baseline run over `horizon` oracle calls.
pub fn ucb1_run(
    horizon: usize,
    f: &HolderFunction,
    f_star: f64,
    source: &mut dyn RewardSource,
    rng: &mut RunRng,
    meta: TraceMeta,
) -> Result<RegretTrace> {
    let mut state = Ucb1State::new(horizon, f.dim())?;
    let mut trace = RegretTrace::with_capacity(meta, horizon);
    for _ in 0..horizon {
        let step = state.advance(source, rng);
        trace.push_gap(f_star - f.evaluate(&step.x)?);
    }
    Ok(trace)
}
