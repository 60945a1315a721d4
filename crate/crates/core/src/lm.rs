//! The outer generalized Levenberg–Marquardt loop.
//!
//! At iterate `x_k` the damping is `μ = ρ√Δ_k` with `Δ_k = F(x_k) − (g* + h*)`.
//! The subproblem is solved to the membership certificate and the candidate
//! is accepted only if `F(x) ≤ F(x_k) − ((1−θ)/2)μ‖x − x_k‖²`; otherwise `ρ`
//! grows by `α` and the same `k` is retried. `ρ` never decreases. The test
//! tolerates [`linalg::roundoff_slack`] so that rounding noise near the
//! solution does not inflate `ρ`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::apg::{apg_solve, cg_solve, ApgConfig};
use crate::error::{Result, SolveError};
use crate::ledger::OracleLedger;
use crate::linalg;
use crate::model::LinearizedModel;
use crate::problem::{CompositeProblem, EvalPoint};
use crate::stationarity::{self, StationarityMeasure};
use crate::trace::{RunTrace, Status, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Subsolver {
    #[default]
    Apg,
    Cg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    /// Used both in the acceptance test and as the subproblem certificate
    /// tolerance (it overrides `apg.theta`).
    pub theta: f64,
    pub rho_min: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub delta_floor: f64,
    pub apg: ApgConfig,
    pub subsolver: Subsolver,
    /// Stop once the weighted oracle cost reaches this value.
    pub budget: Option<u64>,
    pub record_iterates: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            rho_min: 1e-2,
            alpha: 2.0,
            epsilon: 1e-8,
            max_outer_iters: 1000,
            delta_floor: 1e-14,
            apg: ApgConfig::default(),
            subsolver: Subsolver::Apg,
            budget: None,
            record_iterates: false,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta > 0.0
            && self.theta < 1.0
            && self.alpha > 1.0
            && self.rho_min > 0.0
            && self.epsilon >= 0.0
            && self.delta_floor >= 0.0;
        if !ok {
            return Err(SolveError::ParameterDomain(format!(
                "invalid LM config {self:?}"
            )));
        }
        self.subproblem_config().validate()
    }

    pub(crate) fn subproblem_config(&self) -> ApgConfig {
        ApgConfig {
            theta: self.theta,
            ..self.apg
        }
    }
}

/// `μ = ρ√Δ_k`.
pub fn damping(rho: f64, delta: f64) -> Result<f64> {
    if !(rho > 0.0) || !(delta > 0.0) {
        return Err(SolveError::ParameterDomain(format!(
            "damping needs ρ > 0 and Δ > 0 (ρ={rho}, Δ={delta})"
        )));
    }
    Ok(rho * delta.sqrt())
}

/// `F_new ≤ F_old − ((1−θ)/2)·μ·step²`.
pub fn accept_test(f_new: f64, f_old: f64, theta: f64, mu: f64, step_norm: f64) -> bool {
    f_new <= f_old - 0.5 * (1.0 - theta) * mu * step_norm * step_norm
}

/// Number of `ρ` increases over a finished run.
pub fn rho_backtrack_count(trace: &RunTrace) -> usize {
    trace.total_backtracks()
}

/// `L_c√(2L_h)/(1−θ)`: the damping coefficient above which every certified
/// subproblem solution passes the acceptance test.
pub fn rho_threshold(lipschitz_jac: f64, lipschitz_loss: f64, theta: f64) -> f64 {
    lipschitz_jac * (2.0 * lipschitz_loss).sqrt() / (1.0 - theta)
}

/// An accepted step, handed to observers before the iterate advances.
#[derive(Debug)]
pub struct StepEvent<'a, 'p> {
    pub k: usize,
    pub model: &'a LinearizedModel<'p>,
    pub x_next: &'a [f64],
    pub f_prev: f64,
    pub f_next: f64,
    pub mu: f64,
    pub rho: f64,
    pub theta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub trace: RunTrace,
    pub ledger: OracleLedger,
}

pub fn lm_solve(problem: &CompositeProblem, x0: &[f64], config: &LmConfig) -> Result<SolveOutcome> {
    lm_solve_observed(problem, x0, config, |_| {})
}

pub fn lm_solve_observed(
    problem: &CompositeProblem,
    x0: &[f64],
    config: &LmConfig,
    mut observer: impl FnMut(&StepEvent<'_, '_>),
) -> Result<SolveOutcome> {
    config.validate()?;
    let start = Instant::now();
    let reg = problem.regularizer();
    let sub_cfg = config.subproblem_config();
    let lower = problem.lower_bound();
    let mut ledger = OracleLedger::new();

    let mut point = problem.evaluate(x0, &mut ledger)?;
    if !point.g.is_finite() {
        return Err(SolveError::ParameterDomain(
            "starting point lies outside dom g".into(),
        ));
    }
    let measure_kind = if reg.is_separable() {
        StationarityMeasure::Exact
    } else {
        StationarityMeasure::ProxResidual
    };
    let mut trace = RunTrace::new(measure_kind, config.record_iterates);
    let mut rho = config.rho_min;
    trace.push(
        TraceRow {
            k: 0,
            f: point.objective(),
            delta: point.objective() - lower,
            omega: f64::NAN,
            rho,
            mu: 0.0,
            inner_iters: 0,
            backtracks: 0,
            oracle_cost: ledger.cost(),
            wall_s: start.elapsed().as_secs_f64(),
        },
        &point.x,
    );
    let budget_hit = |l: &OracleLedger| config.budget.is_some_and(|b| l.cost() >= b);
    let mut curvature_hint: Option<f64> = None;

    let mut k = 0usize;
    'outer: loop {
        if budget_hit(&ledger) {
            trace.status = Status::BudgetExhausted;
            break;
        }
        let f_k = point.objective();
        let delta = f_k - lower;
        let mu_guess = if delta > 0.0 { rho * delta.sqrt() } else { 1.0 };
        let mut model = problem.linearize(&point, mu_guess, &mut ledger)?;
        let grad = model.grad_at_base(&mut ledger)?;
        let s = curvature_hint.unwrap_or(config.apg.alpha_bar * mu_guess);
        let (omega, _) = stationarity::measure(reg, &point.x, &grad, s);
        trace.set_last_omega(omega, ledger.cost());

        if omega <= config.epsilon {
            trace.status = Status::Stationary;
            break;
        }
        if delta <= config.delta_floor * (1.0 + f_k.abs()) {
            trace.status = Status::DeltaFloor;
            break;
        }
        if k >= config.max_outer_iters {
            trace.status = Status::MaxIters;
            break;
        }

        let mut backtracks = 0usize;
        let mut inner_total = 0usize;
        let (next, mu) = loop {
            let mu = damping(rho, delta)?;
            model.set_mu(mu)?;
            let solved = match config.subsolver {
                Subsolver::Apg => apg_solve(&model, &sub_cfg, &mut ledger).map(|(x, r)| {
                    curvature_hint = Some(r.eta_final);
                    (x, r.inner_iters)
                }),
                Subsolver::Cg => {
                    cg_solve(&model, &mut ledger, config.theta).map(|(x, r)| (x, r.iterations))
                }
            };
            let (x_new, inner) = match solved {
                Ok(v) => v,
                Err(SolveError::SubproblemStall { .. }) => {
                    trace.status = Status::SubproblemStall;
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            inner_total += inner;
            let candidate: Option<EvalPoint> = match problem.evaluate(&x_new, &mut ledger) {
                Ok(p) => Some(p),
                Err(SolveError::NumericalFailure { .. }) => None,
                Err(e) => return Err(e),
            };
            if let Some(p) = candidate {
                let step = linalg::dist(&p.x, &point.x);
                let f_ref = f_k + linalg::roundoff_slack(f_k);
                if accept_test(p.objective(), f_ref, config.theta, mu, step) {
                    break (p, mu);
                }
            }
            rho *= config.alpha;
            backtracks += 1;
            if budget_hit(&ledger) {
                trace.status = Status::BudgetExhausted;
                break 'outer;
            }
        };

        observer(&StepEvent {
            k,
            model: &model,
            x_next: &next.x,
            f_prev: f_k,
            f_next: next.objective(),
            mu,
            rho,
            theta: config.theta,
            delta,
        });

        k += 1;
        trace.push(
            TraceRow {
                k,
                f: next.objective(),
                delta: next.objective() - lower,
                omega: f64::NAN,
                rho,
                mu,
                inner_iters: inner_total,
                backtracks,
                oracle_cost: ledger.cost(),
                wall_s: start.elapsed().as_secs_f64(),
            },
            &next.x,
        );
        point = next;
    }

    Ok(SolveOutcome {
        x: point.x,
        trace,
        ledger,
    })
}
