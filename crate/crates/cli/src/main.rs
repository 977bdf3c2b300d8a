//! Experiment CLI: run cells, sweep grids, fit regret exponents, compare
//! the meta layer against the baseline.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 assertion
//! violation from `rate --assert-slope`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smoothbandit::config::ExperimentConfig;
use smoothbandit::harness;

#[derive(Parser)]
#[command(name = "smoothbandit", version, about = "Bandit optimization of smooth rewards: experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every (horizon, seed) cell and emit the per-step trace CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the grid and emit the final-regret summary CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit log-log regret exponents from a summary CSV.
    Rate {
        /// Summary CSV produced by `sweep`.
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated grouping keys (algorithm, alpha_true, alpha_input, d).
        #[arg(long, value_delimiter = ',')]
        group: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// `min:max` window every fitted slope must land in; either side may
        /// be empty. Violations exit with code 3.
        #[arg(long)]
        assert_slope: Option<String>,
    },
    /// Paired comparison: UCB meta layer vs the UCB1-over-bins baseline on
    /// matched seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Optional per-seed slope CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn emit(output: &Option<PathBuf>, text: &str) -> smoothbandit::Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(path: &PathBuf) -> smoothbandit::Result<ExperimentConfig> {
    ExperimentConfig::from_json(&fs::read_to_string(path)?)
}

fn parse_slope_window(spec: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| format!("--assert-slope wants min:max, got {spec}"))?;
    let parse = |s: &str, default: f64| -> Result<f64, String> {
        if s.is_empty() {
            Ok(default)
        } else {
            s.parse().map_err(|e| format!("bad slope bound {s}: {e}"))
        }
    };
    Ok((parse(lo, f64::NEG_INFINITY)?, parse(hi, f64::INFINITY)?))
}

fn real_main() -> Result<(), (u8, String)> {
    let cli = Cli::parse();
    let cfg_err = |e: smoothbandit::Error| (2u8, e.to_string());
    match cli.cmd {
        Cmd::Run { config, output } => {
            let cfg = load_config(&config).map_err(cfg_err)?;
            let results = harness::run_experiment(&cfg, true).map_err(cfg_err)?;
            emit(&output, &harness::trace_csv(&results)).map_err(cfg_err)?;
        }
        Cmd::Sweep { config, output } => {
            let cfg = load_config(&config).map_err(cfg_err)?;
            let results = harness::run_experiment(&cfg, false).map_err(cfg_err)?;
            let rows = harness::summarize(&cfg, &results).map_err(cfg_err)?;
            emit(&output, &harness::summary_csv(&rows)).map_err(cfg_err)?;
        }
        Cmd::Rate { input, group, output, assert_slope } => {
            let text = fs::read_to_string(&input).map_err(|e| (2, e.to_string()))?;
            let rows = harness::parse_summary_csv(&text).map_err(cfg_err)?;
            let fits = harness::rate_fits(&rows, &group).map_err(cfg_err)?;
            emit(&output, &harness::rate_csv(&group, &fits)).map_err(cfg_err)?;
            if let Some(spec) = assert_slope {
                let (lo, hi) = parse_slope_window(&spec).map_err(|m| (2, m))?;
                for gf in &fits {
                    let s = gf.fit.slope;
                    if !(lo <= s && s <= hi) {
                        return Err((
                            3,
                            format!(
                                "slope {s:.4} of group [{}] outside [{lo}, {hi}]",
                                gf.group.join(",")
                            ),
                        ));
                    }
                }
            }
        }
        Cmd::Compare { config, output } => {
            let cfg = load_config(&config).map_err(cfg_err)?;
            let report = harness::compare_report(&cfg).map_err(cfg_err)?;
            let mut csv = String::from("seed,meta_slope,baseline_slope\n");
            for (seed, m, b) in &report.per_seed {
                csv.push_str(&format!("{seed},{m:.16e},{b:.16e}\n"));
            }
            println!(
                "ucb_meta   slope {:+.4} (r^2 {:.4})",
                report.meta_fit.slope, report.meta_fit.r_squared
            );
            println!(
                "ucb1_bins  slope {:+.4} (r^2 {:.4})",
                report.baseline_fit.slope, report.baseline_fit.r_squared
            );
            println!(
                "per-seed slope wins (meta < baseline): {} of {}",
                report.meta_wins,
                report.per_seed.len()
            );
            if let Some(path) = output {
                fs::write(path, csv).map_err(|e| (2, e.to_string()))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
