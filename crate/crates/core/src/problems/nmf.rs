//! Synthetic matrix completion with nonnegative factors:
//!
//! `min (1/N) Σ_{(i,j,s)∈Ω} (⟨u_i, v_j⟩ − s)² + λ(‖U‖²_F + ‖V‖²_F)  s.t. U, V ≥ 0`
//!
//! written as `½‖c(x)‖²` with residuals `√(2/N)(⟨u_i, v_j⟩ − s)` followed by
//! the ridge block `√(2λ)·x` (omitted when `λ = 0`). Variables are
//! `x = (vec U, vec V)` with both factors stored row-major.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Result, SolveError};
use crate::linalg;
use crate::loss::SquaredNorm;
use crate::problem::{CompositeProblem, ResidualMap};
use crate::regularizer::NonNegative;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfParams {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub lambda: f64,
    pub n_obs: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian noise added to planted ratings.
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct NmfResidual {
    p: usize,
    q: usize,
    r: usize,
    obs: Vec<(usize, usize, f64)>,
    obs_scale: f64,
    ridge_scale: f64,
}

impl NmfResidual {
    fn u_row<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[i * self.r..(i + 1) * self.r]
    }

    fn v_row<'a>(&self, x: &'a [f64], j: usize) -> &'a [f64] {
        let off = self.p * self.r;
        &x[off + j * self.r..off + (j + 1) * self.r]
    }

    fn has_ridge(&self) -> bool {
        self.ridge_scale > 0.0
    }

    pub fn observations(&self) -> &[(usize, usize, f64)] {
        &self.obs
    }
}

impl ResidualMap for NmfResidual {
    fn dim_x(&self) -> usize {
        (self.p + self.q) * self.r
    }

    fn dim_r(&self) -> usize {
        self.obs.len() + if self.has_ridge() { self.dim_x() } else { 0 }
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut c: Vec<f64> = self
            .obs
            .iter()
            .map(|&(i, j, s)| {
                self.obs_scale * (linalg::dot(self.u_row(x, i), self.v_row(x, j)) - s)
            })
            .collect();
        if self.has_ridge() {
            c.extend(x.iter().map(|v| self.ridge_scale * v));
        }
        c
    }

    fn jvp(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .obs
            .iter()
            .map(|&(i, j, _)| {
                self.obs_scale
                    * (linalg::dot(self.u_row(u, i), self.v_row(x, j))
                        + linalg::dot(self.u_row(x, i), self.v_row(u, j)))
            })
            .collect();
        if self.has_ridge() {
            out.extend(u.iter().map(|v| self.ridge_scale * v));
        }
        out
    }

    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let r = self.r;
        let off = self.p * r;
        let mut out = if self.has_ridge() {
            linalg::scale(self.ridge_scale, &w[self.obs.len()..])
        } else {
            vec![0.0; self.dim_x()]
        };
        for (&(i, j, _), &wl) in self.obs.iter().zip(w) {
            let a = self.obs_scale * wl;
            for l in 0..r {
                out[i * r + l] += a * x[off + j * r + l];
                out[off + j * r + l] += a * x[i * r + l];
            }
        }
        out
    }
}

/// A generated instance together with its planted factors and the
/// recommended starting point.
#[derive(Debug, Clone)]
pub struct NmfInstance {
    pub problem: CompositeProblem,
    /// `(vec U*, vec V*)`, the factors the ratings were generated from.
    pub planted: Vec<f64>,
    /// Entries `|ξ|` with `ξ ~ N(0, 10⁻³)` (variance), so the start is feasible.
    pub start: Vec<f64>,
}

pub fn make_nmf(params: NmfParams) -> Result<NmfInstance> {
    let NmfParams {
        p,
        q,
        r,
        lambda,
        n_obs,
        seed,
        noise,
    } = params;
    if p == 0 || q == 0 || r == 0 || r > p.min(q) {
        return Err(SolveError::ParameterDomain(format!(
            "NMF needs 1 ≤ r ≤ min(p, q) (p={p}, q={q}, r={r})"
        )));
    }
    if n_obs == 0 || n_obs > p * q {
        return Err(SolveError::ParameterDomain(format!(
            "NMF needs 1 ≤ N ≤ p·q (N={n_obs}, p·q={})",
            p * q
        )));
    }
    if !(lambda >= 0.0) || !(noise >= 0.0) {
        return Err(SolveError::ParameterDomain(format!(
            "NMF needs λ ≥ 0 and noise ≥ 0 (λ={lambda}, noise={noise})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = (p + q) * r;
    let planted: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut picks = index::sample(&mut rng, p * q, n_obs).into_vec();
    picks.sort_unstable();
    let obs = picks
        .into_iter()
        .map(|flat| {
            let (i, j) = (flat / q, flat % q);
            let u = &planted[i * r..(i + 1) * r];
            let v = &planted[p * r + j * r..p * r + (j + 1) * r];
            let e: f64 = StandardNormal.sample(&mut rng);
            (i, j, linalg::dot(u, v) + noise * e)
        })
        .collect();

    let init = Normal::new(0.0, 1e-3_f64.sqrt()).expect("valid normal");
    let start: Vec<f64> = (0..dim).map(|_| init.sample(&mut rng).abs()).collect();

    let residual = NmfResidual {
        p,
        q,
        r,
        obs,
        obs_scale: (2.0 / n_obs as f64).sqrt(),
        ridge_scale: (2.0 * lambda).sqrt(),
    };
    let problem = CompositeProblem::new(
        format!("nmf_synthetic(p={p},q={q},r={r},N={n_obs})"),
        Arc::new(residual),
        Arc::new(SquaredNorm::half()),
        Arc::new(NonNegative),
    );
    Ok(NmfInstance {
        problem,
        planted,
        start,
    })
}
