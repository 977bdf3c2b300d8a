//! Experiment orchestration: run (algorithm x function x horizon x seed)
//! cells, record pseudo-regret, fit empirical exponents, emit CSV.
//!
//! Cells are embarrassingly parallel; each owns an RNG derived from the cell
//! coordinates and the experiment identity, never from execution order, so
//! permuting or parallelizing runs cannot change any output byte. Reals are
//! formatted with 17 significant digits.

use rayon::prelude::*;

use crate::baselines::Ucb1State;
use crate::config::{AlgorithmSpec, ExperimentConfig};
use crate::corral::{adapt_runner, corral_meta_runner, AdaptConfig};
use crate::linucb::Profile;
use crate::meta::{DoublingRunner, MetaConfig, MetaRunner};
use crate::testbed::{HolderFunction, NoiseModel, NoisyOracle};
use crate::trace::{fit_rate, RateFit, RegretTrace, TraceMeta};
use crate::{Error, Result, RunRng};
use rand::SeedableRng;

/// One per-step record of a run, the row of the trace CSV.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub t: usize,
    /// Bin advanced this step; -1 when the step has no single bin (replays
    /// inside adaptation runs).
    pub bin: i64,
    pub x: Vec<f64>,
    pub y: f64,
    pub cum_regret: f64,
    /// Corral-style algorithms record which base was sampled.
    pub chosen_base: Option<usize>,
}

/// Result of one (horizon, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub horizon: usize,
    pub seed: u64,
    pub trace: RegretTrace,
    /// Per-step rows, kept only when requested.
    pub rows: Vec<StepRow>,
}

/// FNV-1a over bytes; stable across platforms and runs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Hash of everything that defines cell semantics (not horizons/seeds/workers).
pub fn experiment_identity(cfg: &ExperimentConfig) -> u64 {
    let ident = serde_json::json!({
        "function": cfg.function,
        "algorithm": cfg.algorithm,
        "delta": cfg.delta,
        "sigma": cfg.sigma,
        "noise": cfg.noise,
        "profile": cfg.profile,
    });
    fnv1a(ident.to_string().as_bytes())
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer.
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent (oracle, algorithm) RNG streams for one cell.
pub fn cell_rngs(identity: u64, horizon: usize, seed: u64) -> (RunRng, RunRng) {
    let base = mix(identity ^ mix(horizon as u64) ^ mix(seed.wrapping_mul(0x9e3779b97f4a7c15)));
    (RunRng::seed_from_u64(mix(base ^ 0x6f72_61_63_6c_65)), RunRng::seed_from_u64(mix(base ^ 0x61_6c_67_6f)))
}

/// The smoothness and constant actually handed to an algorithm: explicit
/// overrides win, otherwise the function's own exponent and recorded
/// constant.
pub fn algorithm_inputs(cfg: &ExperimentConfig, f: &HolderFunction) -> (f64, f64) {
    let (alpha_over, const_over) = match &cfg.algorithm {
        AlgorithmSpec::UcbMeta { alpha, holder_const, .. } => (*alpha, *holder_const),
        AlgorithmSpec::CorralMeta { alpha, holder_const } => (*alpha, *holder_const),
        AlgorithmSpec::Adapt { target, .. } => (Some(*target), None),
        AlgorithmSpec::Ucb1Bins {} => (Some(1.0), None),
    };
    (alpha_over.unwrap_or(f.alpha()), const_over.unwrap_or(f.recorded_const()))
}

fn run_cell(
    cfg: &ExperimentConfig,
    f: &HolderFunction,
    f_star: f64,
    identity: u64,
    horizon: usize,
    seed: u64,
    with_rows: bool,
) -> Result<CellResult> {
    let (oracle_rng, mut algo_rng) = cell_rngs(identity, horizon, seed);
    let noise = NoiseModel { sigma: cfg.sigma, distribution: cfg.noise };
    let mut source = NoisyOracle::new(f, noise, oracle_rng);
    let (alpha_in, const_in) = algorithm_inputs(cfg, f);
    let meta = TraceMeta { algorithm: cfg.algorithm.name().into(), seed, config_hash: identity };
    let mut trace = RegretTrace::with_capacity(meta, horizon);
    let mut rows = Vec::with_capacity(if with_rows { horizon } else { 0 });
    let mut record = |trace: &RegretTrace,
                      t: usize,
                      bin: i64,
                      x: &[f64],
                      y: f64,
                      chosen: Option<usize>,
                      rows: &mut Vec<StepRow>| {
        if with_rows {
            rows.push(StepRow {
                t,
                bin,
                x: x.to_vec(),
                y,
                cum_regret: trace.final_regret(),
                chosen_base: chosen,
            });
        }
    };

    let mcfg = MetaConfig {
        alpha: alpha_in,
        holder_const: const_in,
        d: f.dim(),
        horizon,
        delta: cfg.delta,
        sigma: cfg.sigma,
        profile: cfg.profile,
    };

    match &cfg.algorithm {
        AlgorithmSpec::UcbMeta { doubling: false, .. } => {
            let mut runner = MetaRunner::new(&mcfg)?;
            for t in 1..=horizon {
                let step = runner.advance(&mut source, &mut algo_rng);
                trace.push_gap(f_star - f.evaluate(&step.x)?);
                record(&trace, t, step.bin as i64, &step.x, step.y, None, &mut rows);
            }
        }
        AlgorithmSpec::UcbMeta { doubling: true, .. } => {
            let mut runner = DoublingRunner::new(&mcfg)?;
            for t in 1..=horizon {
                let step = runner.advance(&mut source, &mut algo_rng)?;
                trace.push_gap(f_star - f.evaluate(&step.x)?);
                record(&trace, t, step.bin as i64, &step.x, step.y, None, &mut rows);
            }
        }
        AlgorithmSpec::CorralMeta { .. } => {
            let mut runner = corral_meta_runner(&mcfg)?;
            for t in 1..=horizon {
                let step = runner.advance(&mut source, &mut algo_rng)?;
                trace.push_gap(f_star - f.evaluate(&step.x)?);
                record(&trace, t, step.base as i64, &step.x, step.y, Some(step.base), &mut rows);
            }
        }
        AlgorithmSpec::Adapt { target, eta_override } => {
            let acfg = AdaptConfig {
                r: *target,
                d: f.dim(),
                horizon,
                delta: cfg.delta,
                sigma: cfg.sigma,
                profile: cfg.profile,
                holder_const: const_in,
                eta_override: *eta_override,
            };
            let mut runner = adapt_runner(&acfg)?;
            for t in 1..=horizon {
                let step = runner.advance(&mut source, &mut algo_rng)?;
                trace.push_gap(f_star - f.evaluate(&step.x)?);
                record(&trace, t, -1, &step.x, step.y, Some(step.base), &mut rows);
            }
        }
        AlgorithmSpec::Ucb1Bins {} => {
            let mut state = Ucb1State::new(horizon, f.dim())?;
            for t in 1..=horizon {
                let step = state.advance(&mut source, &mut algo_rng);
                trace.push_gap(f_star - f.evaluate(&step.x)?);
                record(&trace, t, step.bin as i64, &step.x, step.y, None, &mut rows);
            }
        }
    }
    Ok(CellResult { horizon, seed, trace, rows })
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Run every (horizon, seed) cell of the experiment. Results come back
/// sorted by (horizon, seed) regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, with_rows: bool) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let (f, cert) = cfg.function.build_certified()?;
    let identity = experiment_identity(cfg);
    let cells: Vec<(usize, u64)> = cfg
        .horizons
        .iter()
        .flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let mut results = with_pool(cfg.workers, || {
        cells
            .par_iter()
            .map(|&(t, s)| run_cell(cfg, &f, cert.f_star, identity, t, s, with_rows))
            .collect::<Result<Vec<_>>>()
    })??;
    results.sort_by_key(|r| (r.horizon, r.seed));
    Ok(results)
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_point(x: &[f64]) -> String {
    x.iter().map(|&v| fmt_real(v)).collect::<Vec<_>>().join(";")
}

/// Per-step trace CSV: `horizon,seed,t,bin,x,y,cum_regret[,chosen_base]`.
pub fn trace_csv(results: &[CellResult]) -> String {
    let corral = results.iter().any(|r| r.rows.iter().any(|row| row.chosen_base.is_some()));
    let mut out = String::from("horizon,seed,t,bin,x,y,cum_regret");
    if corral {
        out.push_str(",chosen_base");
    }
    out.push('\n');
    for cell in results {
        for row in &cell.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                cell.horizon,
                cell.seed,
                row.t,
                row.bin,
                fmt_point(&row.x),
                fmt_real(row.y),
                fmt_real(row.cum_regret),
            ));
            if corral {
                match row.chosen_base {
                    Some(b) => out.push_str(&format!(",{b}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub alpha_true: f64,
    pub alpha_input: f64,
    pub d: usize,
    pub horizon: usize,
    pub seed: u64,
    pub final_regret: f64,
}

pub const SUMMARY_HEADER: &str = "algorithm,alpha_true,alpha_input,d,T,seed,final_regret";

/// Collapse cell results into summary rows.
pub fn summarize(cfg: &ExperimentConfig, results: &[CellResult]) -> Result<Vec<SummaryRow>> {
    let f = cfg.function.build()?;
    let (alpha_input, _) = algorithm_inputs(cfg, &f);
    Ok(results
        .iter()
        .map(|cell| SummaryRow {
            algorithm: cfg.algorithm.name().into(),
            alpha_true: f.alpha(),
            alpha_input,
            d: f.dim(),
            horizon: cell.horizon,
            seed: cell.seed,
            final_regret: cell.trace.final_regret(),
        })
        .collect())
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm,
            fmt_real(r.alpha_true),
            fmt_real(r.alpha_input),
            r.d,
            r.horizon,
            r.seed,
            fmt_real(r.final_regret),
        ));
    }
    out
}

/// Parse a summary CSV produced by [`summary_csv`].
pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty summary csv".into()))?;
    if header.trim() != SUMMARY_HEADER {
        return Err(Error::Config(format!("unexpected summary header: {header}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::Config(format!("summary row {} malformed", i + 2)));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("summary row {}: {e}", i + 2)))
        };
        rows.push(SummaryRow {
            algorithm: parts[0].to_string(),
            alpha_true: parse_f(parts[1])?,
            alpha_input: parse_f(parts[2])?,
            d: parts[3]
                .parse()
                .map_err(|e| Error::Config(format!("summary row {}: {e}", i + 2)))?,
            horizon: parts[4]
                .parse()
                .map_err(|e| Error::Config(format!("summary row {}: {e}", i + 2)))?,
            seed: parts[5]
                .parse()
                .map_err(|e| Error::Config(format!("summary row {}: {e}", i + 2)))?,
            final_regret: parse_f(parts[6])?,
        });
    }
    Ok(rows)
}

/// Columns a rate fit may group by.
pub const GROUP_KEYS: &[&str] = &["algorithm", "alpha_true", "alpha_input", "d"];

fn group_value(row: &SummaryRow, key: &str) -> String {
    match key {
        "algorithm" => row.algorithm.clone(),
        "alpha_true" => fmt_real(row.alpha_true),
        "alpha_input" => fmt_real(row.alpha_input),
        "d" => row.d.to_string(),
        _ => unreachable!("validated key"),
    }
}

/// One fitted group of a rate report.
#[derive(Debug, Clone)]
pub struct GroupFit {
    /// Values of the grouping keys, in key order.
    pub group: Vec<String>,
    pub fit: RateFit,
}

/// Group summary rows by `keys`, average final regret over seeds per
/// horizon, and fit one exponent per group. Groups come back sorted by
/// their key values.
pub fn rate_fits(rows: &[SummaryRow], keys: &[String]) -> Result<Vec<GroupFit>> {
    for k in keys {
        if !GROUP_KEYS.contains(&k.as_str()) {
            return Err(Error::Config(format!(
                "unknown group key {k}; valid: {}",
                GROUP_KEYS.join(",")
            )));
        }
    }
    let mut groups: std::collections::BTreeMap<Vec<String>, Vec<&SummaryRow>> =
        std::collections::BTreeMap::new();
    for row in rows {
        let key: Vec<String> = keys.iter().map(|k| group_value(row, k)).collect();
        groups.entry(key).or_default().push(row);
    }
    let mut fits = Vec::new();
    for (group, members) in groups {
        let mut by_horizon: std::collections::BTreeMap<usize, Vec<f64>> =
            std::collections::BTreeMap::new();
        for r in members {
            by_horizon.entry(r.horizon).or_default().push(r.final_regret);
        }
        let table: Vec<(f64, f64)> = by_horizon
            .into_iter()
            .map(|(t, regs)| (t as f64, regs.iter().sum::<f64>() / regs.len() as f64))
            .collect();
        fits.push(GroupFit { group, fit: fit_rate(&table)? });
    }
    Ok(fits)
}

pub fn rate_csv(keys: &[String], fits: &[GroupFit]) -> String {
    let mut out = keys.join(",");
    if !keys.is_empty() {
        out.push(',');
    }
    out.push_str("slope,intercept,r_squared,points\n");
    for gf in fits {
        for g in &gf.group {
            out.push_str(g);
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_real(gf.fit.slope),
            fmt_real(gf.fit.intercept),
            fmt_real(gf.fit.r_squared),
            gf.fit.points.len(),
        ));
    }
    out
}

/// Paired meta-vs-baseline comparison on matched seeds.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub meta_fit: RateFit,
    pub baseline_fit: RateFit,
    /// Per-seed fitted slopes: (seed, meta slope, baseline slope).
    pub per_seed: Vec<(u64, f64, f64)>,
    /// Seeds where the meta slope is strictly smaller.
    pub meta_wins: usize,
}

/// Run the config's function/horizons/seeds under both the UCB meta layer
/// and the UCB1 baseline and compare their fitted exponents, overall and
/// per seed.
pub fn compare_report(cfg: &ExperimentConfig) -> Result<CompareReport> {
    let mut meta_cfg = cfg.clone();
    meta_cfg.algorithm = AlgorithmSpec::UcbMeta {
        alpha: match &cfg.algorithm {
            AlgorithmSpec::UcbMeta { alpha, .. } => *alpha,
            _ => None,
        },
        holder_const: None,
        doubling: false,
    };
    let mut base_cfg = cfg.clone();
    base_cfg.algorithm = AlgorithmSpec::Ucb1Bins {};

    let meta_rows = summarize(&meta_cfg, &run_experiment(&meta_cfg, false)?)?;
    let base_rows = summarize(&base_cfg, &run_experiment(&base_cfg, false)?)?;

    let no_keys: Vec<String> = Vec::new();
    let meta_fit = rate_fits(&meta_rows, &no_keys)?.remove(0).fit;
    let baseline_fit = rate_fits(&base_rows, &no_keys)?.remove(0).fit;

    let mut per_seed = Vec::new();
    let mut meta_wins = 0;
    for &seed in &cfg.seeds {
        let table = |rows: &[SummaryRow]| -> Vec<(f64, f64)> {
            rows.iter()
                .filter(|r| r.seed == seed)
                .map(|r| (r.horizon as f64, r.final_regret))
                .collect()
        };
        let m = fit_rate(&table(&meta_rows))?.slope;
        let b = fit_rate(&table(&base_rows))?.slope;
        if m < b {
            meta_wins += 1;
        }
        per_seed.push((seed, m, b));
    }
    Ok(CompareReport { meta_fit, baseline_fit, per_seed, meta_wins })
}
