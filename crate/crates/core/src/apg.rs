//! Subproblem solvers for the damped linearized model.
//!
//! [`apg_solve`] is an accelerated proximal gradient method with backtracking
//! on the curvature estimate `η`. It stops as soon as its iterate `x̄` carries
//! the certificate
//!
//! `‖∇H̄(x̄_{t+1}) − ∇H̄(y_t) − η(x̄_{t+1} − y_t)‖ ≤ θμ‖x̄_{t+1} − x_k‖`,
//!
//! which bounds `ω̄_{k,μ}(x̄_{t+1})` because `−(∇H̄(y_t) + η(x̄_{t+1} − y_t))`
//! is a subgradient of `g` at `x̄_{t+1}`. [`cg_solve`] handles the special case
//! `g ≡ 0`, `h = (w/2)‖·‖²` where the subproblem is a linear system.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolveError};
use crate::ledger::{Oracle, OracleLedger};
use crate::linalg;
use crate::model::{LinearizedModel, ModelPoint};

/// Upper limit on inner iterations regardless of configuration.
pub const INNER_ITER_HARD_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApgConfig {
    pub theta: f64,
    pub alpha_bar: f64,
    pub beta_bar: f64,
    /// Evaluate the termination test every `check_interval` iterations.
    pub check_interval: usize,
    /// `None` picks `⌈50(2 + √(η_max/μ))⌉`, re-evaluated as `η` grows.
    pub max_inner_iters: Option<usize>,
    /// `η` is never shrunk below `eta_floor_factor · μ`.
    pub eta_floor_factor: f64,
}

impl Default for ApgConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            alpha_bar: 2.0,
            beta_bar: 0.95,
            check_interval: 1,
            max_inner_iters: None,
            eta_floor_factor: 1.0 + 1e-6,
        }
    }
}

impl ApgConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta > 0.0
            && self.theta < 1.0
            && self.beta_bar > 0.0
            && self.beta_bar < 1.0
            && self.alpha_bar > 1.0
            && self.check_interval >= 1
            && self.eta_floor_factor > 1.0
            && self.max_inner_iters.is_none_or(|m| m >= 1);
        if ok {
            Ok(())
        } else {
            Err(SolveError::ParameterDomain(format!(
                "invalid APG config {self:?}"
            )))
        }
    }

    fn iteration_cap(&self, eta_max: f64, mu: f64) -> usize {
        match self.max_inner_iters {
            Some(m) => m.min(INNER_ITER_HARD_CAP),
            None => {
                let c = (50.0 * (2.0 + (eta_max / mu).sqrt())).ceil();
                if c >= INNER_ITER_HARD_CAP as f64 {
                    INNER_ITER_HARD_CAP
                } else {
                    c as usize
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApgReport {
    pub inner_iters: usize,
    pub eta_final: f64,
    pub eta_max: f64,
    /// Left-hand side of the last termination test that was evaluated.
    pub residual_final: f64,
    pub backtracks: usize,
    /// How often the `η` floor kicked in.
    pub floor_clamps: usize,
}

/// One step of the estimate-sequence recurrence: returns `(b_{t+1}, τ)`.
pub fn momentum_step(b: f64, mu: f64, eta: f64) -> Result<(f64, f64)> {
    if !(eta > mu && mu >= 0.0 && b >= 0.0) {
        return Err(SolveError::ParameterDomain(format!(
            "momentum step needs η > μ ≥ 0 and b ≥ 0 (b={b}, μ={mu}, η={eta})"
        )));
    }
    let b_next =
        (1.0 + 2.0 * eta * b + (1.0 + 4.0 * eta * b * (1.0 + mu * b)).sqrt()) / (2.0 * (eta - mu));
    let gap = b_next - b;
    let tau = gap * (1.0 + mu * b) / (b_next * (1.0 + mu * b) + mu * b * gap);
    Ok((b_next, tau))
}

/// `H̄(x̄) ≤ H̄(y) + ⟨∇H̄(y), x̄ − y⟩ + (η/2)‖x̄ − y‖²`, evaluated literally.
pub fn sufficient_decrease(
    value_next: f64,
    value_y: f64,
    grad_y: &[f64],
    x_next: &[f64],
    y: &[f64],
    eta: f64,
) -> bool {
    let d = linalg::sub(x_next, y);
    value_next <= value_y + linalg::dot(grad_y, &d) + 0.5 * eta * linalg::norm_sq(&d)
}

/// The backtracking acceptance test for curvature estimate `eta`.
pub fn backtrack_condition(
    model: &LinearizedModel<'_>,
    y: &[f64],
    x_next: &[f64],
    eta: f64,
    ledger: &mut OracleLedger,
) -> Result<bool> {
    let yp = model.eval(y, ledger)?;
    let gy = model.grad_at(&yp, ledger)?;
    let xp = model.eval(x_next, ledger)?;
    Ok(sufficient_decrease(xp.value, yp.value, &gy, x_next, y, eta))
}

/// Solves the subproblem with the default initial curvature `η = ᾱμ`.
pub fn apg_solve(
    model: &LinearizedModel<'_>,
    config: &ApgConfig,
    ledger: &mut OracleLedger,
) -> Result<(Vec<f64>, ApgReport)> {
    apg_solve_from(model, config, config.alpha_bar * model.mu(), ledger)
}

/// Solves the subproblem starting from curvature estimate `eta0 > μ`.
pub fn apg_solve_from(
    model: &LinearizedModel<'_>,
    config: &ApgConfig,
    eta0: f64,
    ledger: &mut OracleLedger,
) -> Result<(Vec<f64>, ApgReport)> {
    config.validate()?;
    let mu = model.mu();
    if !(eta0 > mu) {
        return Err(SolveError::ParameterDomain(format!(
            "initial curvature {eta0} must exceed μ = {mu}"
        )));
    }
    let reg = model.problem().regularizer();
    let xk = model.base_point().to_vec();
    let eta_floor = config.eta_floor_factor * mu;

    let mut xbar = xk.clone();
    let mut z = xk.clone();
    let mut eta = eta0;
    let mut b = 0.0;
    let mut report = ApgReport {
        eta_max: eta,
        residual_final: f64::INFINITY,
        ..ApgReport::default()
    };
    let mut t = 0usize;

    loop {
        if t >= config.iteration_cap(report.eta_max, mu) {
            report.inner_iters = t;
            report.eta_final = eta;
            return Err(SolveError::SubproblemStall {
                iters: t,
                residual: report.residual_final,
                best: xbar,
            });
        }

        let step = loop {
            let (b_next, tau) = momentum_step(b, mu, eta)?;
            let mut y = xbar.clone();
            for (yi, (zi, xi)) in y.iter_mut().zip(z.iter().zip(&xbar)) {
                *yi = xi + tau * (zi - xi);
            }
            let y_pt = model.eval(&y, ledger)?;
            let grad_y = model.grad_at(&y_pt, ledger)?;
            let mut shifted = y.clone();
            linalg::axpy(-1.0 / eta, &grad_y, &mut shifted);
            ledger.charge(Oracle::ProxApply);
            let x_next = reg.prox(&shifted, eta);
            let next_pt = model.eval(&x_next, ledger)?;
            let y_value = y_pt.value + linalg::roundoff_slack(y_pt.value);
            if sufficient_decrease(next_pt.value, y_value, &grad_y, &x_next, &y, eta) {
                break AcceptedStep {
                    b_next,
                    y,
                    grad_y,
                    next: next_pt,
                };
            }
            eta *= config.alpha_bar;
            report.backtracks += 1;
            report.eta_max = report.eta_max.max(eta);
            if !eta.is_finite() {
                return Err(SolveError::NumericalFailure {
                    what: "curvature estimate",
                    point: y,
                });
            }
        };
        t += 1;

        let AcceptedStep {
            b_next,
            y,
            grad_y,
            next,
        } = step;

        if t.is_multiple_of(config.check_interval) {
            let grad_next = model.grad_at(&next, ledger)?;
            let mut r = linalg::sub(&grad_next, &grad_y);
            for (ri, (xi, yi)) in r.iter_mut().zip(next.x.iter().zip(&y)) {
                *ri -= eta * (xi - yi);
            }
            let residual = linalg::norm(&r);
            report.residual_final = residual;
            if residual <= config.theta * mu * linalg::dist(&next.x, &xk) {
                report.inner_iters = t;
                report.eta_final = eta;
                return Ok((next.x, report));
            }
        }

        let phi = (b_next - b) / (1.0 + mu * b_next);
        for (zi, (yi, xi)) in z.iter_mut().zip(y.iter().zip(&next.x)) {
            *zi = (1.0 - mu * phi) * *zi + mu * phi * yi + eta * phi * (xi - yi);
        }
        eta *= config.beta_bar;
        if eta < eta_floor {
            eta = eta_floor;
            report.floor_clamps += 1;
        }
        b = b_next;
        xbar = next.x;
    }
}

struct AcceptedStep {
    b_next: f64,
    y: Vec<f64>,
    grad_y: Vec<f64>,
    next: ModelPoint,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    pub residual_final: f64,
}

/// Matrix-free conjugate gradients on `(wJᵀJ + μI)s = −wJᵀc(x_k)` for
/// `g ≡ 0`, `h = (w/2)‖·‖²`. Stops once `‖∇H̄(x_k + s)‖ ≤ θμ‖s‖`, the same
/// certificate as [`apg_solve`].
pub fn cg_solve(
    model: &LinearizedModel<'_>,
    ledger: &mut OracleLedger,
    theta: f64,
) -> Result<(Vec<f64>, CgReport)> {
    let problem = model.problem();
    if !problem.regularizer().is_zero() {
        return Err(SolveError::UnsupportedRegularizer(format!(
            "conjugate gradients need g ≡ 0, got {}",
            problem.regularizer().name()
        )));
    }
    let Some(w) = problem.loss().quadratic_weight() else {
        return Err(SolveError::UnsupportedRegularizer(format!(
            "conjugate gradients need a squared-norm loss, got {}",
            problem.loss().name()
        )));
    };
    let mu = model.mu();
    let xk = model.base_point();
    let n = xk.len();
    let max_iters = (10 * n + 100).min(INNER_ITER_HARD_CAP);

    let apply = |p: &[f64], ledger: &mut OracleLedger| -> Vec<f64> {
        let jp = model.jvp(p, ledger);
        let mut out = model.vjp(&jp, ledger);
        for (o, pi) in out.iter_mut().zip(p) {
            *o = w * *o + mu * pi;
        }
        out
    };

    let mut r: Vec<f64> = model
        .grad_at_base(ledger)?
        .into_iter()
        .map(|v| -v)
        .collect();
    let mut s = vec![0.0; n];
    let mut report = CgReport {
        iterations: 0,
        residual_final: linalg::norm(&r),
    };
    if report.residual_final == 0.0 {
        return Ok((xk.to_vec(), report));
    }
    let mut p = r.clone();
    let mut rs = linalg::norm_sq(&r);

    while report.iterations < max_iters {
        let ap = apply(&p, ledger);
        let curvature = linalg::dot(&p, &ap);
        if !(curvature > 0.0) {
            break;
        }
        let alpha = rs / curvature;
        linalg::axpy(alpha, &p, &mut s);
        linalg::axpy(-alpha, &ap, &mut r);
        report.iterations += 1;

        let target = theta * mu * linalg::norm(&s);
        if linalg::norm(&r) <= target {
            // confirm against the true model gradient
            let x = linalg::add(xk, &s);
            let grad = model.model_grad(&x, ledger)?;
            report.residual_final = linalg::norm(&grad);
            if report.residual_final <= target {
                return Ok((x, report));
            }
            r = grad.into_iter().map(|v| -v).collect();
            rs = linalg::norm_sq(&r);
            p = r.clone();
            continue;
        }
        let rs_new = linalg::norm_sq(&r);
        let beta = rs_new / rs;
        rs = rs_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(SolveError::SubproblemStall {
        iters: report.iterations,
        residual: linalg::norm(&r),
        best: linalg::add(xk, &s),
    })
}
