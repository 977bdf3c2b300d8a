//! Experiment configuration: JSON in, validated specs out.
//!
//! Unknown keys are rejected at every level so config drift fails loudly.

use serde::{Deserialize, Serialize};

use crate::linucb::Profile;
use crate::testbed::{FunctionKind, HolderFunction, NoiseKind, NoiseModel, OptimumCertificate};
use crate::{Error, Result};

/// Probe spacing used when a function needs grid certification.
pub const CERTIFICATE_RESOLUTION: f64 = 1e-4;

/// Reward function description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    pub d: usize,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(rename = "L", default)]
    pub holder_const: Option<f64>,
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Seed for randomly generated families (cosine mixtures).
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    1.0
}

impl FunctionSpec {
    /// Instantiate the reward function.
    pub fn build(&self) -> Result<HolderFunction> {
        let center = || vec![0.5; self.d];
        match self.kind {
            FunctionKind::PowerBump => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Config("power_bump needs alpha".into()))?;
                HolderFunction::power_bump(
                    self.d,
                    alpha,
                    self.holder_const.unwrap_or(1.0),
                    self.x_star.clone().unwrap_or_else(center),
                    self.amplitude,
                )
            }
            FunctionKind::Quadratic => {
                if let Some(a) = self.alpha {
                    if a != 2.0 {
                        return Err(Error::Config(format!(
                            "quadratic family has alpha = 2, got {a}"
                        )));
                    }
                }
                HolderFunction::quadratic(
                    self.d,
                    self.holder_const.unwrap_or(1.0),
                    self.x_star.clone().unwrap_or_else(center),
                    self.amplitude,
                )
            }
            FunctionKind::TrigMixture => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Config("trig_mixture needs alpha".into()))?;
                HolderFunction::random_trig_mixture(self.d, alpha, self.amplitude, self.seed)
            }
        }
    }

    /// Function plus its optimum certificate (grid-refined when needed).
    pub fn build_certified(&self) -> Result<(HolderFunction, OptimumCertificate)> {
        let f = self.build()?;
        let cert = f.true_max(CERTIFICATE_RESOLUTION)?;
        Ok((f, cert))
    }
}

/// Algorithm selection, tagged by `name`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "name")]
pub enum AlgorithmSpec {
    /// UCB over bins with per-bin linear UCB bases.
    UcbMeta {
        /// Smoothness input; defaults to the function's exponent.
        #[serde(default)]
        alpha: Option<f64>,
        /// Hölder constant input; defaults to the function's recorded constant.
        #[serde(rename = "L", default)]
        holder_const: Option<f64>,
        /// Anytime operation via restarting periods.
        #[serde(default)]
        doubling: bool,
    },
    /// Corral master over smoothed per-bin bases.
    CorralMeta {
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(rename = "L", default)]
        holder_const: Option<f64>,
    },
    /// Corral over an exponent grid of anytime meta runs.
    Adapt {
        #[serde(rename = "R")]
        target: f64,
        #[serde(default)]
        eta_override: Option<f64>,
    },
    /// Fixed-discretization UCB1 baseline.
    Ucb1Bins {},
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::UcbMeta { .. } => "ucb_meta",
            AlgorithmSpec::CorralMeta { .. } => "corral_meta",
            AlgorithmSpec::Adapt { .. } => "adapt",
            AlgorithmSpec::Ucb1Bins {} => "ucb1_bins",
        }
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_sigma() -> f64 {
    0.1
}

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

fn default_profile() -> Profile {
    Profile::Aggressive
}

/// One experiment: (algorithm x function x horizons x seeds).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: FunctionSpec,
    pub algorithm: AlgorithmSpec,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    /// Parallel cell workers; 0 means all available cores.
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must be non-empty".into()));
        }
        if !self.horizons.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("horizons must be strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} not in (0,1)", self.delta)));
        }
        if self.sigma < 0.0 {
            return Err(Error::Config(format!("sigma {} negative", self.sigma)));
        }
        if let AlgorithmSpec::Adapt { target, .. } = self.algorithm {
            if !(target > 0.0 && target <= 2.0) {
                return Err(Error::Config(format!("R {target} not in (0,2]")));
            }
        }
        Ok(())
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel { sigma: self.sigma, distribution: self.noise }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "function": {"kind": "power_bump", "d": 1, "alpha": 2.0, "L": 1.0, "x_star": [0.37]},
        "algorithm": {"name": "ucb_meta"},
        "horizons": [1024, 2048],
        "seeds": [0, 1]
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.sigma, 0.1);
        assert_eq!(cfg.profile, Profile::Aggressive);
        assert_eq!(cfg.algorithm.name(), "ucb_meta");
        let (f, cert) = cfg.function.build_certified().unwrap();
        assert_eq!(f.alpha(), 2.0);
        assert_eq!(cert.f_star, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let bad_top = MINIMAL.replace("\"seeds\"", "\"bogus\": 1, \"seeds\"");
        assert!(ExperimentConfig::from_json(&bad_top).is_err());

        let bad_fn = MINIMAL.replace("\"alpha\": 2.0,", "\"alpha\": 2.0, \"wat\": 3,");
        assert!(ExperimentConfig::from_json(&bad_fn).is_err());

        let bad_algo = MINIMAL.replace(
            r#"{"name": "ucb_meta"}"#,
            r#"{"name": "ucb_meta", "turbo": true}"#,
        );
        assert!(ExperimentConfig::from_json(&bad_algo).is_err());
    }

    #[test]
    fn validation_catches_bad_grids() {
        let dup_seeds = MINIMAL.replace("[0, 1]", "[0, 0]");
        assert!(ExperimentConfig::from_json(&dup_seeds).is_err());

        let unsorted = MINIMAL.replace("[1024, 2048]", "[2048, 1024]");
        assert!(ExperimentConfig::from_json(&unsorted).is_err());

        let quad_alpha = r#"{
            "function": {"kind": "quadratic", "d": 1, "alpha": 1.5},
            "algorithm": {"name": "ucb1_bins"},
            "horizons": [100],
            "seeds": [0]
        }"#;
        let cfg = ExperimentConfig::from_json(quad_alpha).unwrap();
        assert!(cfg.function.build().is_err(), "quadratic must pin alpha = 2");
    }

    #[test]
    fn algorithm_variants_round_trip() {
        for text in [
            r#"{"name": "ucb_meta", "alpha": 1.0, "doubling": true}"#,
            r#"{"name": "corral_meta", "L": 2.0}"#,
            r#"{"name": "adapt", "R": 2.0, "eta_override": 0.001}"#,
            r#"{"name": "ucb1_bins"}"#,
        ] {
            let spec: AlgorithmSpec = serde_json::from_str(text).unwrap();
            let back = serde_json::to_string(&spec).unwrap();
            let again: AlgorithmSpec = serde_json::from_str(&back).unwrap();
            assert_eq!(serde_json::to_string(&again).unwrap(), back);
        }
    }
}
