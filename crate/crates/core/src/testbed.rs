//! Synthetic reward functions with certified smoothness and optima.
//!
//! Three families cover the exponent range (0, 2]:
//! - `PowerBump`: `f(x) = h - (L/d) * sum_i |x_i - x*_i|^alpha`, any alpha in (0, 2],
//!   separable so the Taylor-gap bound can be certified coordinatewise.
//! - `Quadratic`: the exact alpha = 2 member, `f(x) = h - (L/d) * sum_i (x_i - x*_i)^2`.
//! - `TrigMixture`: `f(x) = (1/d) * sum_i sum_j a_ij cos(2 pi k_ij x_i + phase_ij)`,
//!   infinitely differentiable, used as a "smoother than the declared alpha" instance.
//!
//! Every function records the Hölder constant that actually certifies its
//! Taylor-gap bound; the harness feeds that recorded constant (not the nominal
//! `L`) to the algorithms. Observations are `y = f(x) + eta` with zero-mean
//! sub-gaussian noise of parameter `sigma`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, RunRng};

const DOMAIN_EPS: f64 = 1e-9;

/// Reward function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    PowerBump,
    Quadratic,
    TrigMixture,
}

/// One cosine term of a [`FunctionKind::TrigMixture`] coordinate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    /// Integer number of cycles over [0,1].
    pub frequency: u32,
    pub phase: f64,
}

#[derive(Debug, Clone)]
enum Params {
    Bump { x_star: Vec<f64>, peak: f64, power: f64 },
    Trig { terms: Vec<Vec<TrigTerm>> },
}

/// How an optimum certificate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMethod {
    Analytic,
    GridRefined,
}

/// Certified maximum of a reward function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimumCertificate {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub method: CertMethod,
    /// Probe spacing used for grid-refined certificates (0 for analytic).
    pub resolution: f64,
    /// Bound on `max_x f(x) - f_star`; exactly 0 for analytic certificates.
    pub error_bound: f64,
}

/// A reward function on `[0,1]^d` with known Hölder exponent and constant.
#[derive(Debug, Clone)]
pub struct HolderFunction {
    kind: FunctionKind,
    d: usize,
    alpha: f64,
    nominal_const: f64,
    recorded_const: f64,
    params: Params,
    certificate: Option<OptimumCertificate>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::BadAlpha(alpha, "0 < alpha <= 2"));
    }
    Ok(())
}

fn check_in_domain(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d || x.iter().any(|&v| !(-DOMAIN_EPS..=1.0 + DOMAIN_EPS).contains(&v)) {
        return Err(Error::OutOfDomain(x.to_vec(), d));
    }
    Ok(())
}

/// Largest integer strictly below `alpha` (the Taylor degree of the class).
pub fn taylor_degree(alpha: f64) -> usize {
    let f = alpha.floor();
    let l = if f == alpha { f - 1.0 } else { f };
    l.max(0.0) as usize
}

impl HolderFunction {
    /// `f(x) = h - (L/d) * sum_i |x_i - x*_i|^alpha` with an analytic certificate
    /// `(x*, h)`.
    ///
    /// The family Taylor-gap constant is `c * L` with `c = max(1, 2^{2-alpha})`
    /// (c = 1 for alpha <= 1 and alpha = 2); that product is what
    /// [`recorded_const`](Self::recorded_const) reports.
    pub fn power_bump(d: usize, alpha: f64, l: f64, x_star: Vec<f64>, h: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_in_domain(&x_star, d)?;
        let c = if alpha > 1.0 { 2f64.powf(2.0 - alpha) } else { 1.0 };
        Self::bump_family(FunctionKind::PowerBump, d, alpha, l, c * l, x_star, h, alpha)
    }

    /// `f(x) = h - (L/d) * sum_i (x_i - x*_i)^2`: the exact alpha = 2 member,
    /// its Taylor remainder equals `(L/d) * ||x-y||_2^2 <= L ||x-y||_inf^2`.
    pub fn quadratic(d: usize, l: f64, x_star: Vec<f64>, h: f64) -> Result<Self> {
        check_in_domain(&x_star, d)?;
        Self::bump_family(FunctionKind::Quadratic, d, 2.0, l, l, x_star, h, 2.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn bump_family(
        kind: FunctionKind,
        d: usize,
        alpha: f64,
        nominal: f64,
        recorded: f64,
        x_star: Vec<f64>,
        h: f64,
        power: f64,
    ) -> Result<Self> {
        let spread: f64 = x_star
            .iter()
            .map(|&c| c.max(1.0 - c).powf(power))
            .sum::<f64>()
            * nominal
            / d as f64;
        if h > 1.0 + DOMAIN_EPS || h - spread < -1.0 - DOMAIN_EPS {
            return Err(Error::BadAmplitude(format!(
                "peak {h} with range spread {spread} leaves [-1, 1]"
            )));
        }
        let certificate = Some(OptimumCertificate {
            x_star: x_star.clone(),
            f_star: h,
            method: CertMethod::Analytic,
            resolution: 0.0,
            error_bound: 0.0,
        });
        Ok(Self {
            kind,
            d,
            alpha,
            nominal_const: nominal,
            recorded_const: recorded,
            params: Params::Bump { x_star, peak: h, power },
            certificate,
        })
    }

    /// Cosine mixture `f(x) = (1/d) * sum_i g_i(x_i)` with
    /// `g_i = sum_j a_ij cos(2 pi k_ij x_i + phase_ij)`.
    ///
    /// Amplitudes are rescaled so each coordinate mixture satisfies
    /// `sum_j |a_ij| <= 1`, which enforces `||f||_inf <= 1`. The recorded
    /// constant certifies both the degree-l Taylor gap and the Lipschitz
    /// modulus used by grid certification. No certificate is attached until
    /// [`true_max`](Self::true_max) runs.
    pub fn trig_mixture(d: usize, alpha: f64, mut terms: Vec<Vec<TrigTerm>>) -> Result<Self> {
        check_alpha(alpha)?;
        if terms.len() != d || terms.iter().any(|t| t.is_empty()) {
            return Err(Error::BadAmplitude(
                "need a non-empty term list per coordinate".into(),
            ));
        }
        for coord in &mut terms {
            let total: f64 = coord.iter().map(|t| t.amplitude.abs()).sum();
            if total > 1.0 {
                for t in coord.iter_mut() {
                    t.amplitude /= total;
                }
            }
        }
        let l = taylor_degree(alpha);
        let factorial = (1..=l + 1).product::<usize>() as f64;
        let mut taylor_const: f64 = 0.0;
        let mut lip_const: f64 = 0.0;
        for coord in &terms {
            let deriv_sup: f64 = coord
                .iter()
                .map(|t| t.amplitude.abs() * (2.0 * std::f64::consts::PI * t.frequency as f64).powi(l as i32 + 1))
                .sum();
            let lip: f64 = coord
                .iter()
                .map(|t| t.amplitude.abs() * 2.0 * std::f64::consts::PI * t.frequency as f64)
                .sum();
            taylor_const = taylor_const.max(deriv_sup / factorial);
            lip_const = lip_const.max(lip);
        }
        Ok(Self {
            kind: FunctionKind::TrigMixture,
            d,
            alpha,
            nominal_const: taylor_const.max(lip_const),
            recorded_const: taylor_const.max(lip_const),
            params: Params::Trig { terms },
            certificate: None,
        })
    }

    /// Random cosine mixture with 3 terms per coordinate, total amplitude
    /// `amplitude` per coordinate, frequencies 1..=3.
    pub fn random_trig_mixture(d: usize, alpha: f64, amplitude: f64, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::BadAmplitude(format!(
                "amplitude {amplitude} not in [0, 1]"
            )));
        }
        let mut rng = RunRng::seed_from_u64(seed);
        let mut terms = Vec::with_capacity(d);
        for _ in 0..d {
            let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let coord = raw
                .iter()
                .enumerate()
                .map(|(j, &a)| TrigTerm {
                    amplitude: amplitude * a / total,
                    frequency: j as u32 + 1,
                    phase: rng.random_range(0.0..2.0 * std::f64::consts::PI),
                })
                .collect();
            terms.push(coord);
        }
        Self::trig_mixture(d, alpha, terms)
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Nominal `L` the function was built with.
    pub fn nominal_const(&self) -> f64 {
        self.nominal_const
    }

    /// Hölder constant that certifies the family's Taylor-gap bound; this is
    /// what the harness feeds to algorithms.
    pub fn recorded_const(&self) -> f64 {
        self.recorded_const
    }

    /// Certificate attached at construction (analytic families) or by
    /// [`true_max`](Self::true_max).
    pub fn certificate(&self) -> Option<&OptimumCertificate> {
        self.certificate.as_ref()
    }

    /// Noiseless evaluation.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_in_domain(x, self.d)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.params {
            Params::Bump { x_star, peak, power } => {
                let sum: f64 = x
                    .iter()
                    .zip(x_star)
                    .map(|(&xi, &ci)| (xi - ci).abs().powf(*power))
                    .sum();
                peak - self.nominal_const / self.d as f64 * sum
            }
            Params::Trig { terms } => {
                let mut total = 0.0;
                for (xi, coord) in x.iter().zip(terms) {
                    total += coord_trig(coord, *xi);
                }
                total / self.d as f64
            }
        }
    }

    /// Degree-l Taylor polynomial of `f` around `y`, evaluated at `x`, using
    /// the family's analytic derivatives (l comes from the declared alpha).
    pub fn taylor_approx(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_in_domain(y, self.d)?;
        check_in_domain(x, self.d)?;
        let mut value = self.eval_unchecked(y);
        if taylor_degree(self.alpha) >= 1 {
            for i in 0..self.d {
                value += self.partial(y, i) * (x[i] - y[i]);
            }
        }
        Ok(value)
    }

    fn partial(&self, y: &[f64], i: usize) -> f64 {
        match &self.params {
            Params::Bump { x_star, power, .. } => {
                let u = y[i] - x_star[i];
                if u == 0.0 {
                    0.0
                } else {
                    -self.nominal_const / self.d as f64 * power * u.abs().powf(power - 1.0) * u.signum()
                }
            }
            Params::Trig { terms } => {
                let tau = 2.0 * std::f64::consts::PI;
                let g: f64 = terms[i]
                    .iter()
                    .map(|t| {
                        -t.amplitude * tau * t.frequency as f64 * (tau * t.frequency as f64 * y[i] + t.phase).sin()
                    })
                    .sum();
                g / self.d as f64
            }
        }
    }

    /// Noisy zeroth-order observation `f(x) + eta`.
    pub fn sample_reward(&self, x: &[f64], noise: &NoiseModel, rng: &mut RunRng) -> Result<f64> {
        Ok(self.evaluate(x)? + noise.draw(rng))
    }

    /// Certify the maximum. Analytic families return their construction-time
    /// certificate; the cosine mixture is certified by a per-coordinate grid
    /// scan at `resolution` followed by golden-section refinement (the family
    /// is a sum of per-coordinate mixtures, so coordinates maximize
    /// independently).
    pub fn true_max(&self, resolution: f64) -> Result<OptimumCertificate> {
        if let Some(cert) = &self.certificate {
            return Ok(cert.clone());
        }
        let Params::Trig { terms } = &self.params else {
            unreachable!("analytic families always carry a certificate");
        };
        if resolution <= 0.0 {
            return Err(Error::ResolutionTooCoarse { resolution, bound: f64::INFINITY });
        }
        let mean_lip: f64 = terms
            .iter()
            .map(|coord| {
                coord
                    .iter()
                    .map(|t| t.amplitude.abs() * 2.0 * std::f64::consts::PI * t.frequency as f64)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / self.d as f64;
        let bound = 0.5 * resolution * mean_lip;
        if bound > 0.1 {
            return Err(Error::ResolutionTooCoarse { resolution, bound });
        }

        let mut x_star = Vec::with_capacity(self.d);
        let mut f_star = 0.0;
        for coord in terms {
            let g = |x: f64| coord_trig(coord, x);
            let steps = (1.0 / resolution).ceil() as usize;
            let mut best_x = 0.0;
            let mut best_v = g(0.0);
            for k in 1..=steps {
                let x = (k as f64 * resolution).min(1.0);
                let v = g(x);
                if v > best_v {
                    best_v = v;
                    best_x = x;
                }
            }
            let (rx, rv) = golden_max(&g, (best_x - resolution).max(0.0), (best_x + resolution).min(1.0));
            if rv > best_v {
                best_v = rv;
                best_x = rx;
            }
            x_star.push(best_x);
            f_star += best_v;
        }
        Ok(OptimumCertificate {
            x_star,
            f_star: f_star / self.d as f64,
            method: CertMethod::GridRefined,
            resolution,
            error_bound: bound,
        })
    }
}

fn coord_trig(terms: &[TrigTerm], x: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    terms
        .iter()
        .map(|t| t.amplitude * (tau * t.frequency as f64 * x + t.phase).cos())
        .sum()
}

/// Golden-section maximization on [a, b]; returns (argmax, max).
fn golden_max(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..80 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
        if b - a < 1e-13 {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    (mid, g(mid))
}

/// Zero-mean noise with sub-gaussian parameter `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub distribution: NoiseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Gaussian with standard deviation `sigma`.
    Gaussian,
    /// Uniform on `[-sigma, sigma]` (sub-gaussian with parameter `sigma`).
    UniformBounded,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        Self { sigma, distribution: NoiseKind::Gaussian }
    }

    pub fn uniform(sigma: f64) -> Self {
        Self { sigma, distribution: NoiseKind::UniformBounded }
    }

    pub fn draw(&self, rng: &mut RunRng) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseKind::Gaussian => {
                // Box-Muller; two uniform draws per sample keeps the stream
                // layout independent of any cached spare value.
                let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.random();
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                self.sigma * z
            }
            NoiseKind::UniformBounded => rng.random_range(-self.sigma..=self.sigma),
        }
    }
}

/// Source of noisy rewards; the simulators only see this surface.
pub trait RewardSource {
    fn query(&mut self, x: &[f64]) -> f64;
}

/// The standard source: a reward function plus a noise model and an owned
/// RNG stream.
pub struct NoisyOracle<'a> {
    function: &'a HolderFunction,
    noise: NoiseModel,
    rng: RunRng,
    calls: u64,
}

impl<'a> NoisyOracle<'a> {
    pub fn new(function: &'a HolderFunction, noise: NoiseModel, rng: RunRng) -> Self {
        Self { function, noise, rng, calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

impl RewardSource for NoisyOracle<'_> {
    fn query(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        self.function
            .sample_reward(x, &self.noise, &mut self.rng)
            .expect("simulators only query in-domain points")
    }
}
