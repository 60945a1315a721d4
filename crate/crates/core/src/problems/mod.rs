//! Bundled benchmark instances and oracle self-checks.

mod linear_ls;
mod nmf;
mod rosenbrock;
mod toy;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use linear_ls::{gaussian_vector, make_linear_ls, matrix_with_singular_values, AffineResidual};
pub use nmf::{make_nmf, NmfInstance, NmfParams, NmfResidual};
pub use rosenbrock::{make_rosenbrock, RosenbrockResidual};
pub use toy::{
    make_shifted_square, make_shifted_square_unconstrained, make_toy_interval, ShiftedSquare,
};

use crate::error::{Result, SolveError};
use crate::linalg;
use crate::problem::{CompositeProblem, ResidualMap};

fn default_noise() -> f64 {
    0.01
}

/// Serializable description of a bundled instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Rosenbrock2,
    RosenbrockNd {
        d: usize,
    },
    NmfSynthetic {
        p: usize,
        q: usize,
        r: usize,
        #[serde(default)]
        lambda: f64,
        n_obs: usize,
        seed: u64,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    ToyInterval,
    LinearLs {
        /// Rows of `A`.
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        /// Optional box `[lo, hi]` applied to every coordinate.
        #[serde(default)]
        bounds: Option<(f64, f64)>,
    },
}

/// A built instance plus its documented starting point.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: CompositeProblem,
    pub start: Vec<f64>,
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::Rosenbrock2 => "rosenbrock2",
            ProblemSpec::RosenbrockNd { .. } => "rosenbrock_nd",
            ProblemSpec::NmfSynthetic { .. } => "nmf_synthetic",
            ProblemSpec::ToyInterval => "toy_interval",
            ProblemSpec::LinearLs { .. } => "linear_ls",
        }
    }

    pub fn build(&self) -> Result<BuiltProblem> {
        match self {
            ProblemSpec::Rosenbrock2 => Ok(BuiltProblem {
                problem: make_rosenbrock(2),
                start: vec![0.0, 0.0],
            }),
            ProblemSpec::RosenbrockNd { d } => {
                if *d < 2 {
                    return Err(SolveError::ParameterDomain(format!(
                        "rosenbrock_nd needs d ≥ 2, got {d}"
                    )));
                }
                Ok(BuiltProblem {
                    problem: make_rosenbrock(*d),
                    start: vec![0.5; *d],
                })
            }
            ProblemSpec::NmfSynthetic {
                p,
                q,
                r,
                lambda,
                n_obs,
                seed,
                noise,
            } => {
                let inst = make_nmf(NmfParams {
                    p: *p,
                    q: *q,
                    r: *r,
                    lambda: *lambda,
                    n_obs: *n_obs,
                    seed: *seed,
                    noise: *noise,
                })?;
                Ok(BuiltProblem {
                    problem: inst.problem,
                    start: inst.start,
                })
            }
            ProblemSpec::ToyInterval => Ok(BuiltProblem {
                problem: make_toy_interval(),
                start: vec![0.5],
            }),
            ProblemSpec::LinearLs { a, b, bounds } => {
                let rows = a.len();
                let cols = a.first().map_or(0, Vec::len);
                if rows == 0 || cols == 0 || a.iter().any(|r| r.len() != cols) || b.len() != rows {
                    return Err(SolveError::ParameterDomain(
                        "linear_ls needs a nonempty rectangular A and len(b) = rows".into(),
                    ));
                }
                if let Some((lo, hi)) = bounds {
                    if !(lo <= hi) {
                        return Err(SolveError::ParameterDomain(format!(
                            "empty box [{lo}, {hi}]"
                        )));
                    }
                }
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                let start = match bounds {
                    Some((lo, hi)) => vec![0.0_f64.clamp(*lo, *hi); cols],
                    None => vec![0.0; cols],
                };
                Ok(BuiltProblem {
                    problem: make_linear_ls(rows, cols, flat, b.clone(), *bounds),
                    start,
                })
            }
        }
    }
}

/// One-line descriptions of the bundled kinds.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("rosenbrock2", "2-D Rosenbrock, start (0, 0), optimum (1, 1)"),
        ("rosenbrock_nd", "d-dimensional Rosenbrock {d}, start (0.5, ..., 0.5)"),
        (
            "nmf_synthetic",
            "nonnegative matrix completion on planted factors {p, q, r, lambda, n_obs, seed, noise}",
        ),
        ("toy_interval", "(x^2 - 2)^2 over [-1, 1], start 0.5, minimum value 1"),
        ("linear_ls", "0.5 ||Ax - b||^2 with optional box {a, b, bounds}"),
    ]
}

/// Wraps a residual map and perturbs its VJP. Used as a negative control
/// for the adjoint check.
#[derive(Debug)]
pub struct CorruptedAdjoint {
    inner: Arc<dyn ResidualMap>,
}

impl CorruptedAdjoint {
    pub fn wrap(problem: CompositeProblem) -> CompositeProblem {
        let inner = Arc::new(ForwardOnly(problem.clone()));
        problem.with_residual(Arc::new(CorruptedAdjoint { inner }))
    }
}

#[derive(Debug)]
struct ForwardOnly(CompositeProblem);

impl ResidualMap for ForwardOnly {
    fn dim_x(&self) -> usize {
        self.0.dim_x()
    }
    fn dim_r(&self) -> usize {
        self.0.dim_r()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.0.residual_map().eval(x)
    }
    fn jvp(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.0.residual_map().jvp(x, u)
    }
    fn vjp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.0.residual_map().vjp(x, v)
    }
}

impl ResidualMap for CorruptedAdjoint {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_r(&self) -> usize {
        self.inner.dim_r()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.inner.eval(x)
    }
    fn jvp(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.inner.jvp(x, u)
    }
    fn vjp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.inner.vjp(x, v);
        let total: f64 = v.iter().sum();
        if let Some(first) = out.first_mut() {
            *first += 0.1 * total + 1e-3;
        }
        out
    }
}

/// Largest errors seen by [`finite_diff_check`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct OracleCheck {
    /// `max ‖fd − Ju‖ / max(‖Ju‖, 1)` over directions.
    pub jvp_rel_error: f64,
    /// `max |⟨Ju, v⟩ − ⟨u, Jᵀv⟩| / (1 + ‖u‖‖v‖)` over directions.
    pub adjoint_rel_error: f64,
}

impl OracleCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.jvp_rel_error.max(self.adjoint_rel_error)
    }
}

/// Central-difference JVP check (step `1e−6·(1 + ‖x‖∞)`) plus the adjoint
/// identity, over the given `(u, v)` direction pairs.
pub fn finite_diff_check(
    problem: &CompositeProblem,
    x: &[f64],
    directions: &[(Vec<f64>, Vec<f64>)],
) -> OracleCheck {
    let c = problem.residual_map();
    let step = 1e-6 * (1.0 + linalg::norm_inf(x));
    let mut check = OracleCheck::default();
    for (u, v) in directions {
        let ju = c.jvp(x, u);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        linalg::axpy(step, u, &mut xp);
        linalg::axpy(-step, u, &mut xm);
        let fd: Vec<f64> = c
            .eval(&xp)
            .iter()
            .zip(c.eval(&xm))
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect();
        let jvp_err = linalg::dist(&fd, &ju) / linalg::norm(&ju).max(1.0);
        let jtv = c.vjp(x, v);
        let adj = (linalg::dot(&ju, v) - linalg::dot(u, &jtv)).abs()
            / (1.0 + linalg::norm(u) * linalg::norm(v));
        check.jvp_rel_error = check.jvp_rel_error.max(jvp_err);
        check.adjoint_rel_error = check.adjoint_rel_error.max(adj);
    }
    check
}

/// `count` Gaussian direction pairs `(u ∈ R^d, v ∈ R^n)`.
pub fn random_directions<R: Rng>(
    problem: &CompositeProblem,
    count: usize,
    rng: &mut R,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count)
        .map(|_| {
            let u = (0..problem.dim_x())
                .map(|_| StandardNormal.sample(rng))
                .collect();
            let v = (0..problem.dim_r())
                .map(|_| StandardNormal.sample(rng))
                .collect();
            (u, v)
        })
        .collect()
}
