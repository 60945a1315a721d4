use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg;
use crate::loss::SquaredNorm;
use crate::problem::{CompositeProblem, ResidualMap};
use crate::regularizer::{BoxIndicator, Regularizer, Zero};

/// Affine residual `c(x) = Ax − b` with a dense row-major `A`.
#[derive(Debug, Clone)]
pub struct AffineResidual {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl AffineResidual {
    pub fn new(rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>) -> Self {
        assert_eq!(a.len(), rows * cols, "A has the wrong number of entries");
        assert_eq!(b.len(), rows, "b has the wrong length");
        Self { rows, cols, a, b }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn mul(&self, u: &[f64]) -> Vec<f64> {
        self.a
            .chunks_exact(self.cols)
            .map(|row| linalg::dot(row, u))
            .collect()
    }

    fn mul_t(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, vi) in self.a.chunks_exact(self.cols).zip(v) {
            linalg::axpy(*vi, row, &mut out);
        }
        out
    }

    /// Largest singular value of `A` by power iteration on `AᵀA`.
    pub fn spectral_norm(&self) -> f64 {
        let mut v = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w = self.mul_t(&self.mul(&v));
            let n = linalg::norm(&w);
            if n == 0.0 {
                return 0.0;
            }
            let next = n;
            v = linalg::scale(1.0 / n, &w);
            if (next - lambda).abs() <= 1e-15 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }
}

impl ResidualMap for AffineResidual {
    fn dim_x(&self) -> usize {
        self.cols
    }

    fn dim_r(&self) -> usize {
        self.rows
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.mul(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    fn jvp(&self, _x: &[f64], u: &[f64]) -> Vec<f64> {
        self.mul(u)
    }

    fn vjp(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.mul_t(v)
    }
}

/// `½‖Ax − b‖² + g(x)` with `g` zero or a box indicator. `∇c` is constant, so
/// its Lipschitz constant is recorded as 0, and `σ = ‖A‖₂` is stored.
pub fn make_linear_ls(
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    bounds: Option<(f64, f64)>,
) -> CompositeProblem {
    let residual = AffineResidual::new(rows, cols, a, b);
    let sigma = residual.spectral_norm();
    let reg: Arc<dyn Regularizer> = match bounds {
        Some((lo, hi)) => Arc::new(BoxIndicator::new(lo, hi)),
        None => Arc::new(Zero),
    };
    CompositeProblem::new(
        "linear_ls",
        Arc::new(residual),
        Arc::new(SquaredNorm::half()),
        reg,
    )
    .with_lipschitz_jac(0.0)
    .with_jac_norm_bound(sigma)
}

/// Random `rows × cols` matrix `U diag(s) Vᵀ` with orthonormal `U`, `V`
/// (row-major). Requires `singular_values.len() == cols ≤ rows`.
pub fn matrix_with_singular_values(rows: usize, singular_values: &[f64], seed: u64) -> Vec<f64> {
    let cols = singular_values.len();
    assert!(cols <= rows, "need cols ≤ rows");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthonormal_columns(rows, cols, &mut rng);
    let v = random_orthonormal_columns(cols, cols, &mut rng);
    let mut a = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            a[i * cols + j] = (0..cols)
                .map(|l| u[l][i] * singular_values[l] * v[l][j])
                .sum();
        }
    }
    a
}

/// `cols` orthonormal vectors of length `rows`, by Gram–Schmidt (applied
/// twice) on Gaussian samples.
fn random_orthonormal_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for q in &basis {
                let c = linalg::dot(q, &v);
                linalg::axpy(-c, q, &mut v);
            }
        }
        let n = linalg::norm(&v);
        if n > 1e-8 {
            basis.push(linalg::scale(1.0 / n, &v));
        }
    }
    basis
}

/// Gaussian vector with the given seed.
pub fn gaussian_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}
