use std::sync::Arc;

use crate::loss::SquaredNorm;
use crate::problem::{CompositeProblem, ResidualMap};
use crate::regularizer::{BoxIndicator, Regularizer, Zero};

/// `c(x) = x² − 2` on the real line.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedSquare;

impl ResidualMap for ShiftedSquare {
    fn dim_x(&self) -> usize {
        1
    }

    fn dim_r(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0] - 2.0]
    }

    fn jvp(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        vec![2.0 * x[0] * u[0]]
    }

    fn vjp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        vec![2.0 * x[0] * v[0]]
    }
}

/// `min_{|x| ≤ 1} (x² − 2)²`: `g` is the indicator of `[−1, 1]`, `h(y) = y²`
/// (so `L_h = 2`) and `c(x) = x² − 2` (so `L_c = 2`). The minimizers are
/// `x = ±1` with value 1.
pub fn make_toy_interval() -> CompositeProblem {
    CompositeProblem::new(
        "toy_interval",
        Arc::new(ShiftedSquare),
        Arc::new(SquaredNorm { weight: 2.0 }),
        Arc::new(BoxIndicator::new(-1.0, 1.0)),
    )
    .with_lipschitz_jac(2.0)
}

/// The same residual with any `g` and `h = (w/2)y²`; handy for closed-form
/// subproblem checks.
pub fn make_shifted_square(weight: f64, reg: Arc<dyn Regularizer>) -> CompositeProblem {
    CompositeProblem::new(
        "shifted_square",
        Arc::new(ShiftedSquare),
        Arc::new(SquaredNorm { weight }),
        reg,
    )
    .with_lipschitz_jac(2.0)
}

/// `c(x) = x² − 2`, `h = ½y²`, `g ≡ 0`.
pub fn make_shifted_square_unconstrained() -> CompositeProblem {
    make_shifted_square(1.0, Arc::new(Zero))
}
