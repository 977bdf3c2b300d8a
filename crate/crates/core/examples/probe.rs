//! Scratch diagnostics for meta-layer behavior (not part of the library).
use smoothbandit::config::ExperimentConfig;
use smoothbandit::harness::{algorithm_inputs, cell_rngs, experiment_identity};
use smoothbandit::linucb::{beta, LinUcbConfig, LinUcbRunner};
use smoothbandit::meta::{bin_epsilon, num_bins};
use smoothbandit::testbed::{NoiseModel, NoisyOracle, RewardSource};
use smoothbandit::features::FeatureMap;

fn main() {
    let text = std::fs::read_to_string(std::env::args().nth(1).unwrap()).unwrap();
    let cfg = ExperimentConfig::from_json(&text).unwrap();
    let seed: u64 = std::env::args().nth(2).unwrap().parse().unwrap();
    let horizon: usize = std::env::args().nth(3).unwrap().parse().unwrap();
    let (f, _cert) = cfg.function.build_certified().unwrap();
    let identity = experiment_identity(&cfg);
    let (oracle_rng, mut algo_rng) = cell_rngs(identity, horizon, seed);
    let noise = NoiseModel { sigma: cfg.sigma, distribution: cfg.noise };
    let mut source = NoisyOracle::new(&f, noise, oracle_rng);
    let (alpha_in, const_in) = algorithm_inputs(&cfg, &f);

    // Reproduce bin 1 of the T-horizon grid standalone: run the base alone.
    let (_, m) = num_bins(horizon, 1, alpha_in);
    let side = 1.0 / m as f64;
    let bin_k = (0.37 / side).floor() as usize;
    let center = vec![side * (bin_k as f64 + 0.5)];
    let eps = bin_epsilon(const_in, side, alpha_in);
    let map = FeatureMap::for_alpha(1, alpha_in).unwrap();
    let xs: Vec<Vec<f64>> = (0..11).map(|j| vec![center[0] + side * (j as f64 / 10.0 - 0.5)]).collect();
    let candidates: Vec<Vec<f64>> = xs.iter().map(|x| map.featurize(&center, side, x).unwrap()).collect();
    let lcfg = LinUcbConfig {
        dim: map.dim(), epsilon: eps, delta: cfg.delta / (m as f64), sigma: cfg.sigma,
        kappa_sq: map.dim() as f64, beta_const: 2.0, candidates,
    };
    println!("bin {bin_k} center {} side {side} eps {eps}", center[0]);
    let mut runner = LinUcbRunner::new(lcfg.clone()).unwrap();
    let mut counts = vec![0usize; 11];
    let mut cum = 0.0;
    for t in 1..=horizon {
        let out = runner.advance(&mut algo_rng, |i, _| { counts[i] += 1; source.query(&xs[i]) });
        let gap = 1.0 - f.evaluate(&xs[out.executed]).unwrap();
        cum += gap;
        if t.is_power_of_two() && t >= 4096 || t == horizon {
            println!("t={t:6} cum={cum:8.2} beta={:6.2} counts={counts:?}", beta(t, &lcfg));
        }
    }
    println!("final ucbs / means:");
    for (i, x) in xs.iter().enumerate() {
        let u = runner.state.ucb(&runner.cfg, &runner.cfg.candidates[i]);
        let w = runner.state.quad_form(&runner.cfg.candidates[i]).sqrt();
        println!("  cand {i} x={:.3} f={:.4} ucb={u:.4} width={:.4} bias_term={:.4}",
            x[0], f.evaluate(x).unwrap(), beta(runner.state.t(), &lcfg).sqrt() * w,
            u - smoothbandit::linalg::dot(&runner.cfg.candidates[i], runner.state.theta_hat())
              - beta(runner.state.t(), &lcfg).sqrt() * w);
    }
}
