//! Corral master over smoothed bases, and smoothness adaptation over an
//! exponent grid.
//!
//! The master keeps a sampling distribution over base algorithms and updates
//! it by log-barrier online mirror descent on importance-weighted losses,
//! with per-base learning rates that grow whenever a base's probability
//! undercuts its maintained lower bound. Bases are wrapped in a smoothing
//! layer: an activation advances the inner algorithm with probability `1/tau`
//! (tau = activation count) and otherwise replays a uniformly drawn past
//! action without touching the inner state, which keeps a rarely-sampled
//! base's per-round reward close to its running average.
//!
//! Two deployments:
//! - one smoothed per-bin linear UCB base per bin (same initialization as
//!   the UCB meta layer), and
//! - for adaptation to unknown smoothness, one smoothed doubling meta run
//!   per point of a linear exponent grid, with the master's learning rate
//!   tuned to the user-chosen target exponent.

use rand::Rng;

use crate::linucb::Profile;
use crate::meta::{build_bases, BinBase, DoublingRunner, MetaConfig};
use crate::testbed::{HolderFunction, RewardSource};
use crate::trace::{RegretTrace, TraceMeta};
use crate::{Error, Result, RunRng};

/// Anything the smoothing wrapper can drive: one call plays exactly one
/// action against the oracle and returns it with the observed reward.
pub trait BanditRunner {
    fn advance_once(
        &mut self,
        source: &mut dyn RewardSource,
        rng: &mut RunRng,
    ) -> Result<(Vec<f64>, f64)>;
}

impl BanditRunner for BinBase {
    fn advance_once(
        &mut self,
        source: &mut dyn RewardSource,
        rng: &mut RunRng,
    ) -> Result<(Vec<f64>, f64)> {
        let step = self.advance(source, rng);
        Ok((step.x, step.y))
    }
}

impl BanditRunner for DoublingRunner {
    fn advance_once(
        &mut self,
        source: &mut dyn RewardSource,
        rng: &mut RunRng,
    ) -> Result<(Vec<f64>, f64)> {
        let step = self.advance(source, rng)?;
        Ok((step.x, step.y))
    }
}

/// Outcome of one smoothed activation.
#[derive(Debug, Clone)]
pub struct SmoothOutcome {
    pub x: Vec<f64>,
    pub y: f64,
    /// Whether the inner algorithm advanced (false on replays).
    pub fresh: bool,
}

/// Smoothing wrapper around a base algorithm.
#[derive(Debug)]
pub struct SmoothedBase<B> {
    inner: B,
    action_log: Vec<Vec<f64>>,
    activations: usize,
}

impl<B: BanditRunner> SmoothedBase<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, action_log: Vec::new(), activations: 0 }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    /// Total activations so far (fresh advances plus replays).
    pub fn activations(&self) -> usize {
        self.activations
    }

    /// Number of times the inner algorithm actually advanced
    /// (`== action_log().len()`).
    pub fn adv_count(&self) -> usize {
        self.action_log.len()
    }

    pub fn action_log(&self) -> &[Vec<f64>] {
        &self.action_log
    }

    /// Activate once: with probability `1/tau` (tau = activation count)
    /// advance the inner algorithm — always on the first activation —
    /// otherwise replay a uniformly drawn past action through the oracle
    /// without updating the inner state.
    pub fn activate(
        &mut self,
        source: &mut dyn RewardSource,
        rng: &mut RunRng,
    ) -> Result<SmoothOutcome> {
        self.activations += 1;
        let tau = self.activations as f64;
        // The first coin is a guaranteed hit; still draw it so the stream
        // layout is uniform across activations.
        let fresh = rng.random::<f64>() < 1.0 / tau || self.action_log.is_empty();
        if fresh {
            let (x, y) = self.inner.advance_once(source, rng)?;
            self.action_log.push(x.clone());
            Ok(SmoothOutcome { x, y, fresh: true })
        } else {
            let idx = rng.random_range(0..self.action_log.len());
            let x = self.action_log[idx].clone();
            let y = source.query(&x);
            Ok(SmoothOutcome { x, y, fresh: false })
        }
    }
}

/// Master state: sampling distribution plus the per-base threshold book.
#[derive(Debug, Clone)]
pub struct CorralState {
    p: Vec<f64>,
    p_lower: Vec<f64>,
    rho: Vec<f64>,
    eta: Vec<f64>,
    gamma: f64,
    beta_mult: f64,
    t: usize,
    clipped: u64,
}

/// Fresh master over `m` bases with learning rate `eta` tuned for `horizon`.
pub fn corral_init(m: usize, eta: f64, horizon: usize) -> Result<CorralState> {
    if m < 1 {
        return Err(Error::Config("corral needs at least one base".into()));
    }
    if eta <= 0.0 {
        return Err(Error::Config(format!("learning rate {eta} must be positive")));
    }
    if horizon < 3 {
        return Err(Error::Config(format!("horizon {horizon} below 3")));
    }
    let t = horizon as f64;
    Ok(CorralState {
        p: vec![1.0 / m as f64; m],
        p_lower: vec![1.0 / (2.0 * m as f64); m],
        rho: vec![2.0 * m as f64; m],
        eta: vec![eta; m],
        gamma: 1.0 / t,
        beta_mult: (1.0 / t.ln()).exp(),
        t: 0,
        clipped: 0,
    })
}

impl CorralState {
    pub fn num_bases(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_lower(&self) -> &[f64] {
        &self.p_lower
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta_mult(&self) -> f64 {
        self.beta_mult
    }

    pub fn round(&self) -> usize {
        self.t
    }

    /// Rewards clipped into the declared range so far.
    pub fn clipped(&self) -> u64 {
        self.clipped
    }

    /// Draw a base index from the current distribution.
    pub fn sample(&self, rng: &mut RunRng) -> usize {
        let u: f64 = rng.random();
        let mut cdf = 0.0;
        for (i, &pi) in self.p.iter().enumerate() {
            cdf += pi;
            if u < cdf {
                return i;
            }
        }
        self.p.len() - 1
    }

    /// Feed the sampled base's reward back into the master: clip to
    /// `[-1-3 sigma, 1+3 sigma]`, map to a loss in [0, 1], importance-weight
    /// it onto the chosen base, run the mirror-descent reweighting, mix with
    /// the uniform distribution, and maintain the lower bounds.
    pub fn apply_feedback(&mut self, chosen: usize, reward: f64, sigma: f64) {
        let hi = 1.0 + 3.0 * sigma;
        let clipped = reward.clamp(-hi, hi);
        if clipped != reward {
            self.clipped += 1;
        }
        let loss = ((1.0 - clipped) / 2.0).clamp(0.0, 1.0);
        let ell = loss / self.p[chosen];

        self.p = log_barrier_reweight(&self.p, &self.eta, chosen, ell);

        let m = self.p.len() as f64;
        for pi in &mut self.p {
            *pi = (1.0 - self.gamma) * *pi + self.gamma / m;
        }

        for j in 0..self.p.len() {
            if 1.0 / self.p[j] > self.rho[j] {
                self.p_lower[j] = self.p[j] / 2.0;
                self.rho[j] = 1.0 / self.p_lower[j];
                self.eta[j] *= self.beta_mult;
            }
        }
        self.t += 1;
    }
}

/// Log-barrier OMD step: find the normalizer `lambda` with
/// `sum_j 1/(1/p_j + eta_j (l_j - lambda)) = 1` by bisection on
/// `[min l, max l]`, then reweight. Only the chosen coordinate carries a
/// non-zero loss.
fn log_barrier_reweight(p: &[f64], eta: &[f64], chosen: usize, ell: f64) -> Vec<f64> {
    if ell == 0.0 {
        return p.to_vec();
    }
    let loss_at = |j: usize| if j == chosen { ell } else { 0.0 };
    // The mass function is increasing in lambda and crosses 1 inside the
    // bracket; denominators touched past a pole count as +inf.
    let mass = |lambda: f64| -> f64 {
        let mut total = 0.0;
        for j in 0..p.len() {
            let denom = 1.0 / p[j] + eta[j] * (loss_at(j) - lambda);
            if denom <= 0.0 {
                return f64::INFINITY;
            }
            total += 1.0 / denom;
        }
        total
    };
    let mut lo = 0.0;
    let mut hi = ell;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut next: Vec<f64> = (0..p.len())
        .map(|j| 1.0 / (1.0 / p[j] + eta[j] * (loss_at(j) - lambda)))
        .collect();
    let total: f64 = next.iter().sum();
    for v in &mut next {
        *v /= total;
    }
    next
}

/// One consumed oracle call of a Corral run.
#[derive(Debug, Clone)]
pub struct CorralStep {
    pub base: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Master plus its owned smoothed bases.
pub struct CorralRunner<B> {
    state: CorralState,
    bases: Vec<SmoothedBase<B>>,
    sigma: f64,
}

impl<B: BanditRunner> CorralRunner<B> {
    pub fn new(bases: Vec<SmoothedBase<B>>, eta: f64, horizon: usize, sigma: f64) -> Result<Self> {
        let state = corral_init(bases.len(), eta, horizon)?;
        Ok(Self { state, bases, sigma })
    }

    pub fn state(&self) -> &CorralState {
        &self.state
    }

    pub fn bases(&self) -> &[SmoothedBase<B>] {
        &self.bases
    }

    /// Sample a base, activate it once, feed the reward to the master.
    pub fn advance(&mut self, source: &mut dyn RewardSource, rng: &mut RunRng) -> Result<CorralStep> {
        let i = self.state.sample(rng);
        let out = self.bases[i].activate(source, rng)?;
        self.state.apply_feedback(i, out.y, self.sigma);
        Ok(CorralStep { base: i, x: out.x, y: out.y })
    }
}

/// Corral over per-bin smoothed linear UCB bases, one base per bin of the
/// same grid the UCB meta layer would build, with learning rate
/// `(1/d') * sqrt(n/T)`.
pub fn corral_meta_runner(cfg: &MetaConfig) -> Result<CorralRunner<BinBase>> {
    let (grid, bases, _) = build_bases(cfg)?;
    let n_eff = grid.n_bins();
    let d_prime = bases[0].feature_dim();
    let eta = (1.0 / d_prime as f64) * (n_eff as f64 / cfg.horizon as f64).sqrt();
    let smoothed = bases.into_iter().map(SmoothedBase::new).collect();
    CorralRunner::new(smoothed, eta, cfg.horizon, cfg.sigma)
}

/// Full Corral-over-bins run recording pseudo-regret.
pub fn corral_meta_run(
    cfg: &MetaConfig,
    f: &HolderFunction,
    f_star: f64,
    source: &mut dyn RewardSource,
    rng: &mut RunRng,
    meta: TraceMeta,
) -> Result<RegretTrace> {
    let mut runner = corral_meta_runner(cfg)?;
    let mut trace = RegretTrace::with_capacity(meta, cfg.horizon);
    for _ in 0..cfg.horizon {
        let step = runner.advance(source, rng)?;
        trace.push_gap(f_star - f.evaluate(&step.x)?);
    }
    Ok(trace)
}

/// Linear grid of candidate exponents `{R i / floor(ln T), i = 1..floor(ln T)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid {
    pub points: Vec<f64>,
}

impl AlphaGrid {
    pub fn num_bases(&self) -> usize {
        self.points.len()
    }
}

pub fn alpha_grid(r: f64, horizon: usize) -> Result<AlphaGrid> {
    if !(r > 0.0 && r <= 2.0) {
        return Err(Error::BadAlpha(r, "0 < R <= 2"));
    }
    if horizon < 3 {
        return Err(Error::Config(format!("horizon {horizon} below 3")));
    }
    let m = (horizon as f64).ln().floor() as usize;
    let points = (1..=m).map(|i| r * i as f64 / m as f64).collect();
    Ok(AlphaGrid { points })
}

/// Master learning rate `d^{-1} T^{-(d+R)/(d+2R)}` tuned to the target
/// exponent `R`.
pub fn adapt_learning_rate(d: usize, r: f64, horizon: usize) -> f64 {
    let df = d as f64;
    (horizon as f64).powf(-(df + r) / (df + 2.0 * r)) / df
}

/// Inputs of one adaptation run.
#[derive(Debug, Clone)]
pub struct AdaptConfig {
    /// Target exponent: minimax optimality is aimed at the class with this
    /// smoothness; rougher classes degrade gracefully.
    pub r: f64,
    pub d: usize,
    pub horizon: usize,
    pub delta: f64,
    pub sigma: f64,
    pub profile: Profile,
    /// Hölder constant fed to every base.
    pub holder_const: f64,
    /// Overrides [`adapt_learning_rate`] when set.
    pub eta_override: Option<f64>,
}

/// Corral over smoothed anytime meta runs, one per grid exponent. The bases
/// are doubling runners, so none of them needs the horizon.
pub fn adapt_runner(cfg: &AdaptConfig) -> Result<CorralRunner<DoublingRunner>> {
    let grid = alpha_grid(cfg.r, cfg.horizon)?;
    let eta = cfg
        .eta_override
        .unwrap_or_else(|| adapt_learning_rate(cfg.d, cfg.r, cfg.horizon));
    let bases = grid
        .points
        .iter()
        .map(|&alpha_i| {
            let mcfg = MetaConfig {
                alpha: alpha_i,
                holder_const: cfg.holder_const,
                d: cfg.d,
                horizon: 1, // per-period horizons are derived internally
                delta: cfg.delta,
                sigma: cfg.sigma,
                profile: cfg.profile,
            };
            DoublingRunner::new(&mcfg).map(SmoothedBase::new)
        })
        .collect::<Result<Vec<_>>>()?;
    CorralRunner::new(bases, eta, cfg.horizon, cfg.sigma)
}

/// Full adaptation run recording pseudo-regret.
pub fn adapt_run(
    cfg: &AdaptConfig,
    f: &HolderFunction,
    f_star: f64,
    source: &mut dyn RewardSource,
    rng: &mut RunRng,
    meta: TraceMeta,
) -> Result<RegretTrace> {
    let mut runner = adapt_runner(cfg)?;
    let mut trace = RegretTrace::with_capacity(meta, cfg.horizon);
    for _ in 0..cfg.horizon {
        let step = runner.advance(source, rng)?;
        trace.push_gap(f_star - f.evaluate(&step.x)?);
    }
    Ok(trace)
}
