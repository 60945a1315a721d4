use std::f64::consts::SQRT_2;
use std::sync::Arc;

use crate::loss::SquaredNorm;
use crate::problem::{CompositeProblem, ResidualMap};
use crate::regularizer::Zero;

/// Residuals of `Σ (x_i − 1)² + 100(x_{i+1} − x_i²)²` under `h = ½‖·‖²`:
/// `c_{2i} = √2(x_i − 1)`, `c_{2i+1} = 10√2(x_{i+1} − x_i²)`.
#[derive(Debug, Clone)]
pub struct RosenbrockResidual {
    d: usize,
}

impl RosenbrockResidual {
    pub fn new(d: usize) -> Self {
        assert!(d >= 2, "Rosenbrock needs d ≥ 2");
        Self { d }
    }
}

const TEN_SQRT_2: f64 = 10.0 * SQRT_2;

impl ResidualMap for RosenbrockResidual {
    fn dim_x(&self) -> usize {
        self.d
    }

    fn dim_r(&self) -> usize {
        2 * (self.d - 1)
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.dim_r());
        for i in 0..self.d - 1 {
            c.push(SQRT_2 * (x[i] - 1.0));
            c.push(TEN_SQRT_2 * (x[i + 1] - x[i] * x[i]));
        }
        c
    }

    fn jvp(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim_r());
        for i in 0..self.d - 1 {
            out.push(SQRT_2 * u[i]);
            out.push(TEN_SQRT_2 * (u[i + 1] - 2.0 * x[i] * u[i]));
        }
        out
    }

    fn vjp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for i in 0..self.d - 1 {
            let (a, b) = (v[2 * i], v[2 * i + 1]);
            out[i] += SQRT_2 * a - 2.0 * TEN_SQRT_2 * x[i] * b;
            out[i + 1] += TEN_SQRT_2 * b;
        }
        out
    }
}

/// Rosenbrock in `d` dimensions. `∇c` is `20√2`-Lipschitz.
pub fn make_rosenbrock(d: usize) -> CompositeProblem {
    let name = if d == 2 {
        "rosenbrock2".to_string()
    } else {
        format!("rosenbrock_nd(d={d})")
    };
    CompositeProblem::new(
        name,
        Arc::new(RosenbrockResidual::new(d)),
        Arc::new(SquaredNorm::half()),
        Arc::new(Zero),
    )
    .with_lipschitz_jac(2.0 * TEN_SQRT_2)
}
