//! Local polynomial feature maps.
//!
//! Inside a bin, a Hölder-smooth function is a misspecified linear model in
//! the monomials of degree <= l (the Taylor degree of the class). Features
//! are evaluated in bin-local rescaled coordinates
//! `u = (x - center) / side in [-1/2, 1/2]^d` rather than raw coordinates:
//! the rescaling is an invertible reparameterization of the same linear
//! model, keeps the Gram matrix well conditioned for small bins, and bounds
//! `||phi(u)||^2` by the feature dimension uniformly.

use crate::testbed::taylor_degree;
use crate::{Error, Result};

/// Exponent vector of one monomial `u^s = prod_i u_i^{s_i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    /// Total order `|s| = sum_i s_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Label used in parameter dumps, e.g. `s=(2,0)`.
    pub fn label(&self) -> String {
        let inner: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        format!("s=({})", inner.join(","))
    }
}

/// Ordered monomial basis of degree <= `degree` in `d` variables.
///
/// Indices are in graded lexicographic order with the zero index (the
/// intercept) first; the ordering is part of the contract so parameter dumps
/// stay reproducible.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    d: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
}

/// Number of monomials with `|s| <= l` in `d` variables:
/// `1 + sum_{1<=j<=l} C(j+d-1, d-1)` (the 1 is the intercept).
pub fn feature_dim(d: usize, degree: usize) -> Result<usize> {
    let mut total: usize = 1;
    for j in 1..=degree {
        let mut c: usize = 1;
        // C(j+d-1, d-1) computed factor by factor.
        for i in 1..d {
            c = c
                .checked_mul(j + i)
                .ok_or(Error::FeatureDimOverflow { d, degree })?
                / i;
        }
        total = total
            .checked_add(c)
            .ok_or(Error::FeatureDimOverflow { d, degree })?;
        if total > 1 << 20 {
            return Err(Error::FeatureDimOverflow { d, degree });
        }
    }
    Ok(total)
}

impl FeatureMap {
    /// Basis for smoothness `alpha`: degree is the largest integer strictly
    /// below `alpha`, so alpha in (0,1] gives the intercept-only map and
    /// alpha in (1,2] gives the affine map.
    pub fn for_alpha(d: usize, alpha: f64) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(Error::BadAlpha(alpha, "alpha > 0"));
        }
        Self::of_degree(d, taylor_degree(alpha))
    }

    pub fn of_degree(d: usize, degree: usize) -> Result<Self> {
        let dim = feature_dim(d, degree)?;
        let mut indices = Vec::with_capacity(dim);
        for order in 0..=degree as u32 {
            grlex_compositions(order, d, &mut indices);
        }
        debug_assert_eq!(indices.len(), dim);
        Ok(Self { d, degree, indices })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Feature dimension d' (includes the intercept coordinate).
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Evaluate `phi` at `x` inside the bin `(center, side)`: coordinates are
    /// the monomials `u^s` of the rescaled point `u = (x - center)/side`.
    pub fn featurize(&self, center: &[f64], side: f64, x: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(center.len(), self.d);
        debug_assert_eq!(x.len(), self.d);
        let mut u = Vec::with_capacity(self.d);
        for i in 0..self.d {
            let ui = (x[i] - center[i]) / side;
            if ui.abs() > 0.5 + 1e-9 {
                return Err(Error::OutOfBin(ui));
            }
            u.push(ui);
        }
        Ok(self
            .indices
            .iter()
            .map(|s| {
                s.0.iter()
                    .zip(&u)
                    .map(|(&p, &ui)| ui.powi(p as i32))
                    .product()
            })
            .collect())
    }
}

/// Append all exponent vectors with total order `order` in lexicographically
/// decreasing order (highest power on the first coordinate comes first).
fn grlex_compositions(order: u32, d: usize, out: &mut Vec<MultiIndex>) {
    let mut current = vec![0u32; d];
    fill(order, 0, &mut current, out);
}

fn fill(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        fill(remaining - v, pos + 1, current, out);
    }
    current[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force enumeration of exponent vectors with |s| <= degree.
    fn enumerate_dim(d: usize, degree: usize) -> usize {
        fn count(d: usize, budget: usize) -> usize {
            if d == 0 {
                return 1;
            }
            (0..=budget).map(|v| count(d - 1, budget - v)).sum()
        }
        count(d, degree)
    }

    #[test]
    fn dimension_matches_enumeration() {
        assert_eq!(feature_dim(1, 0).unwrap(), 1);
        assert_eq!(feature_dim(2, 2).unwrap(), 6);
        assert_eq!(feature_dim(3, 2).unwrap(), 10);
        for d in 1..=5 {
            for l in 0..=4 {
                assert_eq!(feature_dim(d, l).unwrap(), enumerate_dim(d, l), "d={d} l={l}");
            }
        }
    }

    #[test]
    fn dimension_overflow_guard() {
        assert!(feature_dim(64, 12).is_err());
    }

    #[test]
    fn degree_follows_alpha() {
        let m = FeatureMap::for_alpha(2, 2.0).unwrap();
        assert_eq!(m.degree(), 1);
        assert_eq!(m.dim(), 3);
        let idx: Vec<Vec<u32>> = m.indices().iter().map(|s| s.0.clone()).collect();
        assert_eq!(idx, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);

        for d in [1, 2, 5] {
            assert_eq!(FeatureMap::for_alpha(d, 1.0).unwrap().dim(), 1);
        }

        let m = FeatureMap::for_alpha(1, 2.5).unwrap();
        assert_eq!(m.degree(), 2);
        assert_eq!(m.dim(), 3);
        let idx: Vec<Vec<u32>> = m.indices().iter().map(|s| s.0.clone()).collect();
        assert_eq!(idx, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn graded_lex_order_for_two_vars() {
        let m = FeatureMap::of_degree(2, 2).unwrap();
        let idx: Vec<Vec<u32>> = m.indices().iter().map(|s| s.0.clone()).collect();
        assert_eq!(
            idx,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(m.indices()[3].label(), "s=(2,0)");
    }

    #[test]
    fn featurize_hand_values() {
        let m = FeatureMap::of_degree(2, 2).unwrap();
        let phi = m.featurize(&[0.5, 0.5], 0.5, &[0.5, 0.5]).unwrap();
        assert_eq!(phi, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let m = FeatureMap::of_degree(1, 1).unwrap();
        let phi = m.featurize(&[0.5], 0.5, &[0.625]).unwrap();
        assert_eq!(phi, vec![1.0, 0.25]);

        let m = FeatureMap::of_degree(1, 2).unwrap();
        let phi = m.featurize(&[0.0], 1.0, &[0.5]).unwrap();
        assert_eq!(phi, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn featurize_rejects_points_outside_bin() {
        let m = FeatureMap::of_degree(1, 1).unwrap();
        assert!(matches!(m.featurize(&[0.5], 0.2, &[0.7]), Err(crate::Error::OutOfBin(_))));
    }

    proptest! {
        #[test]
        fn norm_bounded_by_dimension(
            d in 1usize..4,
            degree in 0usize..4,
            raw in proptest::collection::vec(0.0f64..1.0, 3),
            center_raw in proptest::collection::vec(0.2f64..0.8, 3),
            side in 0.05f64..0.4,
        ) {
            let m = FeatureMap::of_degree(d, degree).unwrap();
            let center: Vec<f64> = center_raw[..d].to_vec();
            let x: Vec<f64> = center
                .iter()
                .zip(&raw[..d])
                .map(|(&c, &r)| c + side * (r - 0.5))
                .collect();
            let phi = m.featurize(&center, side, &x).unwrap();
            let norm_sq: f64 = phi.iter().map(|v| v * v).sum();
            prop_assert!(norm_sq <= m.dim() as f64 + 1e-12);
        }
    }

    #[test]
    fn least_squares_recovery_on_quadratic_family() {
        use crate::linalg::SpdMatrix;
        use crate::testbed::HolderFunction;
        use rand::{Rng, SeedableRng};

        // Quadratic reward on a bin: exactly linear in degree-2 features,
        // misspecified by at most L * side^2 in degree-1 features.
        let f = HolderFunction::quadratic(1, 1.0, vec![0.3], 1.0).unwrap();
        let center = [0.55];
        let side = 0.1;
        let mut rng = crate::RunRng::seed_from_u64(3);
        let xs: Vec<[f64; 1]> = (0..100)
            .map(|_| [center[0] + side * (rng.random::<f64>() - 0.5)])
            .collect();

        for (degree, tol) in [(2usize, 1e-9), (1usize, 1.0 * side * side)] {
            let m = FeatureMap::of_degree(1, degree).unwrap();
            let mut gram = SpdMatrix::zeros(m.dim());
            let mut rhs = vec![0.0; m.dim()];
            let mut rows = Vec::new();
            for x in &xs {
                let phi = m.featurize(&center, side, x).unwrap();
                let y = f.evaluate(x).unwrap();
                gram.add_outer(&phi);
                for (r, p) in rhs.iter_mut().zip(&phi) {
                    *r += y * p;
                }
                rows.push((phi, y));
            }
            let theta = gram.cholesky().solve(&rhs);
            let worst = rows
                .iter()
                .map(|(phi, y)| (crate::linalg::dot(phi, &theta) - y).abs())
                .fold(0.0f64, f64::max);
            assert!(worst <= tol, "degree={degree} worst={worst} tol={tol}");
        }
    }
}
