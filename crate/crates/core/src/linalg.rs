//! Dense symmetric positive-definite linear algebra for small dimensions.
//!
//! The confidence-ellipsoid state keeps `A = I + sum(phi phi^T)`, so every
//! matrix handled here has eigenvalues >= 1 and Cholesky factorization is
//! unconditionally stable. Feature dimensions stay in the single digits,
//! which makes a hand-rolled row-major implementation both simpler and
//! faster than pulling in a general linear-algebra stack.

/// Symmetric positive-definite matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    /// Identity of the given dimension.
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    /// All-zero matrix; callers must accumulate it to positive definite
    /// before factorizing (used for plain unregularized Gram matrices).
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Rank-1 update A += x x^T.
    pub fn add_outer(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            let xi = x[i];
            for j in 0..self.dim {
                self.data[i * self.dim + j] += xi * x[j];
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Lower-triangular Cholesky factor L with A = L L^T.
    pub fn cholesky(&self) -> Cholesky {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    // Eigenvalues >= 1 by construction; s > 0 always holds.
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Cholesky { dim: n, l }
    }
}

/// Cholesky factorization of an [`SpdMatrix`].
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solve A z = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        debug_assert_eq!(b.len(), n);
        // Forward: L y = b.
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        // Backward: L^T z = y.
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        z
    }

    /// Quadratic form x^T A^{-1} x (equals `‖A^{-1/2} x‖²`).
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        // x^T A^{-1} x = ‖L^{-1} x‖² via one forward substitution.
        let n = self.dim;
        let mut y = vec![0.0; n];
        let mut q = 0.0;
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            let yi = s / self.l[i * n + i];
            y[i] = yi;
            q += yi * yi;
        }
        q
    }

    /// det(A) = prod(diag(L))².
    pub fn det(&self) -> f64 {
        let mut d = 1.0;
        for i in 0..self.dim {
            d *= self.l[i * self.dim + i];
        }
        d * d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn identity_solve_is_noop() {
        let a = SpdMatrix::identity(3);
        let chol = a.cholesky();
        let b = vec![1.0, -2.0, 0.5];
        assert_eq!(chol.solve(&b), b);
        assert_close(chol.det(), 1.0, 1e-15);
    }

    #[test]
    fn rank_one_updates_match_direct_solve() {
        let mut a = SpdMatrix::identity(2);
        a.add_outer(&[1.0, 2.0]);
        a.add_outer(&[-1.0, 0.5]);
        // A = I + [1,2][1,2]^T + [-1,0.5][-1,0.5]^T = [[3, 1.5],[1.5, 5.25]]
        assert_close(a.get(0, 0), 3.0, 1e-15);
        assert_close(a.get(0, 1), 1.5, 1e-15);
        assert_close(a.get(1, 1), 5.25, 1e-15);

        let chol = a.cholesky();
        let z = chol.solve(&[1.0, 0.0]);
        // Verify A z = b.
        assert_close(3.0 * z[0] + 1.5 * z[1], 1.0, 1e-12);
        assert_close(1.5 * z[0] + 5.25 * z[1], 0.0, 1e-12);

        // det([[3,1.5],[1.5,5.25]]) = 15.75 - 2.25 = 13.5
        assert_close(chol.det(), 13.5, 1e-12);

        // Quadratic form against the solve route.
        let x = [0.3, -0.7];
        let q = chol.inv_quad_form(&x);
        let z = chol.solve(&x);
        assert_close(q, dot(&x, &z), 1e-12);
    }

    #[test]
    fn trace_accumulates_outer_products() {
        let mut a = SpdMatrix::identity(4);
        let x = [0.5, 0.5, 0.5, 0.5];
        for _ in 0..7 {
            a.add_outer(&x);
        }
        assert_close(a.trace(), 4.0 + 7.0 * norm_sq(&x), 1e-12);
    }
}
