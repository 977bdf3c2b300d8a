//! UCB meta layer over per-bin misspecified linear UCB bases, plus the
//! doubling wrapper for anytime operation.
//!
//! The domain is tiled with `m^d` equal bins. Each bin runs its own linear
//! UCB on bin-local polynomial features with misspecification
//! `epsilon = L * side^alpha`; the meta layer keeps the latest index value
//! returned by every base and each round advances the base with the largest
//! one. A round consumes exactly one oracle call whether it lands in the
//! init sweep or the main loop.

use rand::Rng;

use crate::features::FeatureMap;
use crate::linucb::{LinUcbConfig, LinUcbRunner, Profile};
use crate::testbed::{HolderFunction, RewardSource};
use crate::trace::{RegretTrace, TraceMeta};
use crate::{Error, Result, RunRng};

/// Regular tiling of `[0,1]^d` into `per_side^d` hypercube bins, centers in
/// canonical row-major order (last coordinate fastest).
#[derive(Debug, Clone)]
pub struct BinGrid {
    d: usize,
    per_side: usize,
    side: f64,
    centers: Vec<Vec<f64>>,
}

impl BinGrid {
    pub fn new(d: usize, per_side: usize) -> Self {
        let per_side = per_side.max(1);
        let side = 1.0 / per_side as f64;
        let n = per_side.pow(d as u32);
        let mut centers = Vec::with_capacity(n);
        for k in 0..n {
            let mut idx = k;
            let mut c = vec![0.0; d];
            for i in (0..d).rev() {
                c[i] = (idx % per_side) as f64 * side + side / 2.0;
                idx /= per_side;
            }
            centers.push(c);
        }
        Self { d, per_side, side, centers }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn per_side(&self) -> usize {
        self.per_side
    }

    /// Total bin count `per_side^d`.
    pub fn n_bins(&self) -> usize {
        self.centers.len()
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k]
    }
}

/// Bin-count schedule `n = round(T^{d/(d+2a)} / ln(T)^{2d/(d+2a)})`, floored
/// at 1, together with the per-side count `m = max(1, round(n^{1/d}))`.
///
/// The grid actually used has `m^d` bins: the schedule's `n` bins of volume
/// `1/n` only tile a hypercube when `n` is a perfect d-th power, so `n` is
/// rounded to a per-side count and downstream epsilons use the realized side
/// length. Horizons below 3 are clamped to 3.
pub fn num_bins(horizon: usize, d: usize, alpha: f64) -> (usize, usize) {
    let t = (horizon.max(3)) as f64;
    let expo = d as f64 / (d as f64 + 2.0 * alpha);
    let raw = t.powf(expo) / t.ln().powf(2.0 * expo);
    let n = (raw.round() as usize).max(1);
    let m = ((n as f64).powf(1.0 / d as f64).round() as usize).max(1);
    (n, m)
}

/// Local misspecification bound `epsilon = L * side^alpha`.
pub fn bin_epsilon(holder_const: f64, side: f64, alpha: f64) -> f64 {
    holder_const * side.powf(alpha)
}

/// Candidate points inside one bin: a uniform per-coordinate grid (11 points
/// per coordinate for d <= 2, 5 for d = 3, 5 capped at 200 total with
/// deterministic striding above).
fn candidate_points(center: &[f64], side: f64) -> Vec<Vec<f64>> {
    let d = center.len();
    let per_coord: usize = match d {
        0..=2 => 11,
        3 => 5,
        _ => 5,
    };
    let total = per_coord.pow(d as u32);
    let mut points = Vec::new();
    let stride = total.div_ceil(200);
    let mut k = 0;
    while k < total {
        let mut idx = k;
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let j = idx % per_coord;
            idx /= per_coord;
            x[i] = center[i] + side * (j as f64 / (per_coord as f64 - 1.0) - 0.5);
        }
        points.push(x);
        k += stride;
    }
    points
}

/// Inputs of one meta run.
#[derive(Debug, Clone)]
pub struct MetaConfig {
    /// Smoothness exponent fed to the algorithm (not necessarily the truth).
    pub alpha: f64,
    /// Hölder constant fed to the algorithm.
    pub holder_const: f64,
    pub d: usize,
    pub horizon: usize,
    pub delta: f64,
    pub sigma: f64,
    pub profile: Profile,
}

/// One bin's base: feature map, candidate points, and the LinUCB driver.
#[derive(Debug, Clone)]
pub struct BinBase {
    xs: Vec<Vec<f64>>,
    runner: LinUcbRunner,
}

/// What one advancement produced.
#[derive(Debug, Clone)]
pub struct BinStep {
    pub x: Vec<f64>,
    pub y: f64,
    /// Index value of the base's next committed action; the meta layer
    /// caches this.
    pub next_ucb: f64,
}

impl BinBase {
    fn new(map: &FeatureMap, center: &[f64], side: f64, cfg_template: &BinCfg) -> Result<Self> {
        let xs = candidate_points(center, side);
        let candidates = xs
            .iter()
            .map(|x| map.featurize(center, side, x))
            .collect::<Result<Vec<_>>>()?;
        let cfg = LinUcbConfig {
            dim: map.dim(),
            epsilon: cfg_template.epsilon,
            delta: cfg_template.delta,
            sigma: cfg_template.sigma,
            kappa_sq: map.dim() as f64,
            beta_const: cfg_template.beta_const,
            candidates,
        };
        Ok(Self { xs, runner: LinUcbRunner::new(cfg)? })
    }

    pub fn config(&self) -> &LinUcbConfig {
        &self.runner.cfg
    }

    /// Feature dimension of the local model.
    pub fn feature_dim(&self) -> usize {
        self.runner.cfg.dim
    }

    fn force_pending(&mut self, idx: usize) {
        self.runner.set_pending(idx);
    }

    /// One execute/observe/update/select cycle against the oracle.
    pub fn advance(&mut self, source: &mut dyn RewardSource, rng: &mut RunRng) -> BinStep {
        let out = self.runner.advance(rng, |i, _| source.query(&self.xs[i]));
        BinStep { x: self.xs[out.executed].clone(), y: out.y, next_ucb: out.next_ucb }
    }
}

struct BinCfg {
    epsilon: f64,
    delta: f64,
    sigma: f64,
    beta_const: f64,
}

/// Build the bin grid and one base per bin exactly as a meta run would:
/// grid from the bin schedule, per-bin misspecification from the realized
/// side length, fail probability split evenly across bins.
pub fn build_bases(cfg: &MetaConfig) -> Result<(BinGrid, Vec<BinBase>, f64)> {
    let (_, m) = num_bins(cfg.horizon, cfg.d, cfg.alpha);
    build_bases_with_per_side(cfg, m)
}

/// Same construction with an explicit per-side count (the doubling wrapper
/// caps early periods so every bin still gets its init pull).
pub fn build_bases_with_per_side(
    cfg: &MetaConfig,
    per_side: usize,
) -> Result<(BinGrid, Vec<BinBase>, f64)> {
    let grid = BinGrid::new(cfg.d, per_side);
    let n_eff = grid.n_bins();
    let map = FeatureMap::for_alpha(cfg.d, cfg.alpha)?;
    let bin_cfg = BinCfg {
        epsilon: bin_epsilon(cfg.holder_const, grid.side(), cfg.alpha),
        delta: cfg.delta / n_eff as f64,
        sigma: cfg.sigma,
        beta_const: cfg.profile.beta_const(),
    };
    let bases = (0..n_eff)
        .map(|k| BinBase::new(&map, grid.center(k), grid.side(), &bin_cfg))
        .collect::<Result<Vec<_>>>()?;
    let epsilon = bin_cfg.epsilon;
    Ok((grid, bases, epsilon))
}

/// Incremental driver of one meta run. Construction wires the grid and the
/// per-bin bases; each [`advance`](Self::advance) consumes exactly one oracle
/// call, first sweeping every bin once in canonical order, then repeatedly
/// advancing the bin with the highest cached index value.
pub struct MetaRunner {
    grid: BinGrid,
    bases: Vec<BinBase>,
    ucb_cache: Vec<f64>,
    counters: Vec<usize>,
    epsilon: f64,
    init_cursor: usize,
    init_choice: Option<usize>,
    steps: usize,
}

/// One consumed oracle call.
#[derive(Debug, Clone)]
pub struct MetaStep {
    pub bin: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

impl MetaRunner {
    pub fn new(cfg: &MetaConfig) -> Result<Self> {
        let (_, m) = num_bins(cfg.horizon, cfg.d, cfg.alpha);
        Self::with_per_side(cfg, m)
    }

    /// Construct with an explicit per-side bin count.
    pub fn with_per_side(cfg: &MetaConfig, per_side: usize) -> Result<Self> {
        let (grid, bases, epsilon) = build_bases_with_per_side(cfg, per_side)?;
        let n_eff = grid.n_bins();
        if cfg.horizon < n_eff {
            return Err(Error::HorizonTooSmall { horizon: cfg.horizon, bins: n_eff });
        }
        Ok(Self {
            ucb_cache: vec![f64::NEG_INFINITY; n_eff],
            counters: vec![0; n_eff],
            epsilon,
            grid,
            bases,
            init_cursor: 0,
            init_choice: None,
            steps: 0,
        })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    /// Shared per-bin misspecification bound.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn bases(&self) -> &[BinBase] {
        &self.bases
    }

    /// Latest index value returned by each base (after its init pull).
    pub fn cached_ucbs(&self) -> &[f64] {
        &self.ucb_cache
    }

    /// Pulls consumed per bin.
    pub fn counters(&self) -> &[usize] {
        &self.counters
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_initialized(&self) -> bool {
        self.init_cursor >= self.bases.len()
    }

    /// One oracle call. During the init sweep all bins execute the same
    /// uniformly drawn first candidate, which keeps noiseless init states
    /// symmetric across bins.
    pub fn advance(&mut self, source: &mut dyn RewardSource, rng: &mut RunRng) -> MetaStep {
        let k = if self.init_cursor < self.bases.len() {
            let k = self.init_cursor;
            let choice = *self
                .init_choice
                .get_or_insert_with(|| rng.random_range(0..self.bases[k].xs.len()));
            self.bases[k].force_pending(choice);
            self.init_cursor += 1;
            k
        } else {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (i, &v) in self.ucb_cache.iter().enumerate() {
                if v > best_val {
                    best_val = v;
                    best = i;
                }
            }
            best
        };
        let step = self.bases[k].advance(source, rng);
        self.ucb_cache[k] = step.next_ucb;
        self.counters[k] += 1;
        self.steps += 1;
        MetaStep { bin: k, x: step.x, y: step.y }
    }
}

/// Full meta run over `cfg.horizon` oracle calls (init pulls included),
/// recording per-step pseudo-regret against the certified `f_star`.
pub fn run(
    cfg: &MetaConfig,
    f: &HolderFunction,
    f_star: f64,
    source: &mut dyn RewardSource,
    rng: &mut RunRng,
    meta: TraceMeta,
) -> Result<RegretTrace> {
    let mut runner = MetaRunner::new(cfg)?;
    let mut trace = RegretTrace::with_capacity(meta, cfg.horizon);
    for _ in 0..cfg.horizon {
        let step = runner.advance(source, rng);
        trace.push_gap(f_star - f.evaluate(&step.x)?);
    }
    Ok(trace)
}

/// Anytime wrapper: restart the meta run on periods of length `2^(i-1)`
/// (i = 1, 2, ...), re-deriving the grid from the period length and running
/// period `i` at fail probability `6 delta / (pi^2 i^2)`.
pub struct DoublingRunner {
    template: MetaConfig,
    base_delta: f64,
    period: usize,
    period_len: usize,
    period_used: usize,
    inner: MetaRunner,
}

impl DoublingRunner {
    pub fn new(cfg: &MetaConfig) -> Result<Self> {
        let template = cfg.clone();
        let base_delta = cfg.delta;
        let inner = Self::build_period(&template, base_delta, 1, 1)?;
        Ok(Self { template, base_delta, period: 1, period_len: 1, period_used: 0, inner })
    }

    fn build_period(
        template: &MetaConfig,
        base_delta: f64,
        period: usize,
        period_len: usize,
    ) -> Result<MetaRunner> {
        let mut cfg = template.clone();
        cfg.horizon = period_len;
        cfg.delta =
            6.0 * base_delta / (std::f64::consts::PI.powi(2) * (period * period) as f64);
        // The first periods can be shorter than their own bin schedule; cap
        // the grid so every bin still gets its init pull.
        let (_, m) = num_bins(period_len, cfg.d, cfg.alpha);
        let cap = (period_len as f64).powf(1.0 / cfg.d as f64).floor() as usize;
        MetaRunner::with_per_side(&cfg, m.min(cap.max(1)))
    }

    /// Current period index (1-based); its length is `2^(period-1)`.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn inner(&self) -> &MetaRunner {
        &self.inner
    }

    pub fn advance(&mut self, source: &mut dyn RewardSource, rng: &mut RunRng) -> Result<MetaStep> {
        if self.period_used == self.period_len {
            self.period += 1;
            self.period_len *= 2;
            self.period_used = 0;
            self.inner =
                Self::build_period(&self.template, self.base_delta, self.period, self.period_len)?;
        }
        self.period_used += 1;
        Ok(self.inner.advance(source, rng))
    }
}

/// Doubling run truncated at `total_horizon` oracle calls.
pub fn doubling_run(
    cfg: &MetaConfig,
    f: &HolderFunction,
    f_star: f64,
    total_horizon: usize,
    source: &mut dyn RewardSource,
    rng: &mut RunRng,
    meta: TraceMeta,
) -> Result<RegretTrace> {
    let mut runner = DoublingRunner::new(cfg)?;
    let mut trace = RegretTrace::with_capacity(meta, total_horizon);
    for _ in 0..total_horizon {
        let step = runner.advance(source, rng)?;
        trace.push_gap(f_star - f.evaluate(&step.x)?);
    }
    Ok(trace)
}
