//! Comparison methods: backtracking proximal gradient (PG) and an LM variant
//! with fixed damping whose subproblems are solved by the same accelerated
//! method (DP).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::apg::{apg_solve_from, ApgConfig};
use crate::error::{Result, SolveError};
use crate::ledger::{Oracle, OracleLedger};
use crate::linalg;
use crate::lm::SolveOutcome;
use crate::problem::{CompositeProblem, EvalPoint};
use crate::stationarity::{self, StationarityMeasure};
use crate::trace::{RunTrace, Status, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgConfig {
    pub l_min: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub budget: Option<u64>,
    pub record_iterates: bool,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            l_min: 1e-2,
            alpha: 2.0,
            epsilon: 1e-8,
            max_iters: 100_000,
            budget: None,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpConfig {
    pub mu_fixed: f64,
    /// Stand-in for the unknown `L_h σ²`; the subproblem starts at `η = μ + L`.
    pub l: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub max_inner_iters: Option<usize>,
    pub delta_floor: f64,
    pub apg: ApgConfig,
    pub budget: Option<u64>,
    pub record_iterates: bool,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            mu_fixed: 1e-2,
            l: 1.0,
            theta: 0.5,
            epsilon: 1e-8,
            max_iters: 1000,
            max_inner_iters: None,
            delta_floor: 1e-14,
            apg: ApgConfig::default(),
            budget: None,
            record_iterates: false,
        }
    }
}

fn measure_kind(problem: &CompositeProblem) -> StationarityMeasure {
    if problem.regularizer().is_separable() {
        StationarityMeasure::Exact
    } else {
        StationarityMeasure::ProxResidual
    }
}

fn start_point(
    problem: &CompositeProblem,
    x0: &[f64],
    ledger: &mut OracleLedger,
) -> Result<EvalPoint> {
    let point = problem.evaluate(x0, ledger)?;
    if !point.g.is_finite() {
        return Err(SolveError::ParameterDomain(
            "starting point lies outside dom g".into(),
        ));
    }
    Ok(point)
}

/// Proximal gradient with a backtracked curvature estimate `L` that starts at
/// `L_min` and is only ever increased.
pub fn pg_solve(problem: &CompositeProblem, x0: &[f64], config: &PgConfig) -> Result<SolveOutcome> {
    if !(config.l_min > 0.0 && config.alpha > 1.0) {
        return Err(SolveError::ParameterDomain(format!(
            "invalid PG config {config:?}"
        )));
    }
    let start = Instant::now();
    let reg = problem.regularizer();
    let lower = problem.lower_bound();
    let mut ledger = OracleLedger::new();
    let mut point = start_point(problem, x0, &mut ledger)?;
    let mut trace = RunTrace::new(measure_kind(problem), config.record_iterates);
    let mut l = config.l_min;
    trace.push(
        TraceRow {
            k: 0,
            f: point.objective(),
            delta: point.objective() - lower,
            omega: f64::NAN,
            rho: l,
            mu: 0.0,
            inner_iters: 0,
            backtracks: 0,
            oracle_cost: ledger.cost(),
            wall_s: start.elapsed().as_secs_f64(),
        },
        &point.x,
    );
    let budget_hit = |l: &OracleLedger| config.budget.is_some_and(|b| l.cost() >= b);

    let mut k = 0usize;
    'outer: loop {
        if budget_hit(&ledger) {
            trace.status = Status::BudgetExhausted;
            break;
        }
        let grad = problem.gradient_at(&point, &mut ledger)?;
        let (omega, _) = stationarity::measure(reg, &point.x, &grad, l);
        trace.set_last_omega(omega, ledger.cost());
        if omega <= config.epsilon {
            trace.status = Status::Stationary;
            break;
        }
        if k >= config.max_iters {
            trace.status = Status::MaxIters;
            break;
        }

        let mut backtracks = 0usize;
        let next = loop {
            let mut shifted = point.x.clone();
            linalg::axpy(-1.0 / l, &grad, &mut shifted);
            ledger.charge(Oracle::ProxApply);
            let z = reg.prox(&shifted, l);
            let candidate = match problem.evaluate(&z, &mut ledger) {
                Ok(p) => Some(p),
                Err(SolveError::NumericalFailure { .. }) => None,
                Err(e) => return Err(e),
            };
            if let Some(p) = candidate {
                let d = linalg::sub(&p.x, &point.x);
                let model = point.h + linalg::dot(&grad, &d) + 0.5 * l * linalg::norm_sq(&d);
                if p.h <= model + linalg::roundoff_slack(point.h) {
                    break p;
                }
            }
            l *= config.alpha;
            backtracks += 1;
            if budget_hit(&ledger) {
                trace.status = Status::BudgetExhausted;
                break 'outer;
            }
        };

        k += 1;
        trace.push(
            TraceRow {
                k,
                f: next.objective(),
                delta: next.objective() - lower,
                omega: f64::NAN,
                rho: l,
                mu: l,
                inner_iters: 1,
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

/// LM with constant damping `μ`, no acceptance test, and the accelerated
/// subproblem solver started at curvature `μ + L`.
pub fn dp_solve(problem: &CompositeProblem, x0: &[f64], config: &DpConfig) -> Result<SolveOutcome> {
    if !(config.mu_fixed > 0.0 && config.l > 0.0) {
        return Err(SolveError::ParameterDomain(format!(
            "invalid DP config {config:?}"
        )));
    }
    let sub_cfg = ApgConfig {
        theta: config.theta,
        max_inner_iters: config.max_inner_iters,
        ..config.apg
    };
    sub_cfg.validate()?;
    let start = Instant::now();
    let reg = problem.regularizer();
    let lower = problem.lower_bound();
    let mu = config.mu_fixed;
    let mut ledger = OracleLedger::new();
    let mut point = start_point(problem, x0, &mut ledger)?;
    let mut trace = RunTrace::new(measure_kind(problem), config.record_iterates);
    trace.push(
        TraceRow {
            k: 0,
            f: point.objective(),
            delta: point.objective() - lower,
            omega: f64::NAN,
            rho: 0.0,
            mu: 0.0,
            inner_iters: 0,
            backtracks: 0,
            oracle_cost: ledger.cost(),
            wall_s: start.elapsed().as_secs_f64(),
        },
        &point.x,
    );
    let mut curvature_hint = mu + config.l;

    let mut k = 0usize;
    loop {
        if config.budget.is_some_and(|b| ledger.cost() >= b) {
            trace.status = Status::BudgetExhausted;
            break;
        }
        let f_k = point.objective();
        let model = problem.linearize(&point, mu, &mut ledger)?;
        let grad = model.grad_at_base(&mut ledger)?;
        let (omega, _) = stationarity::measure(reg, &point.x, &grad, curvature_hint);
        trace.set_last_omega(omega, ledger.cost());
        if omega <= config.epsilon {
            trace.status = Status::Stationary;
            break;
        }
        if f_k - lower <= config.delta_floor * (1.0 + f_k.abs()) {
            trace.status = Status::DeltaFloor;
            break;
        }
        if k >= config.max_iters {
            trace.status = Status::MaxIters;
            break;
        }
        let (x_new, report) = match apg_solve_from(&model, &sub_cfg, mu + config.l, &mut ledger) {
            Ok(v) => v,
            Err(SolveError::SubproblemStall { .. }) => {
                trace.status = Status::SubproblemStall;
                break;
            }
            Err(e) => return Err(e),
        };
        curvature_hint = report.eta_final;
        let next = problem.evaluate(&x_new, &mut ledger)?;

        k += 1;
        trace.push(
            TraceRow {
                k,
                f: next.objective(),
                delta: next.objective() - lower,
                omega: f64::NAN,
                rho: 0.0,
                mu,
                inner_iters: report.inner_iters,
                backtracks: 0,
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
