//! Runtime invariant checks shared by the CLI `verify` command and the test
//! suites.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::Result;
use crate::ledger::OracleLedger;
use crate::linalg;
use crate::lm::{lm_solve_observed, LmConfig, SolveOutcome, StepEvent};
use crate::problem::CompositeProblem;
use crate::problems::{finite_diff_check, random_directions, OracleCheck};
use crate::stationarity::model_stationarity;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckRecord {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }
}

/// Points near `center`, pushed into `dom g` by a unit-weight prox.
pub fn sample_points(
    problem: &CompositeProblem,
    center: &[f64],
    count: usize,
    spread: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).expect("positive spread");
    (0..count)
        .map(|_| {
            let x: Vec<f64> = center.iter().map(|c| c + noise.sample(&mut rng)).collect();
            problem.regularizer().prox(&x, 1.0)
        })
        .collect()
}

/// Worst oracle errors over `points` random points with three direction
/// pairs each.
pub fn check_oracles(
    problem: &CompositeProblem,
    center: &[f64],
    points: usize,
    seed: u64,
) -> OracleCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut worst = OracleCheck::default();
    for x in sample_points(problem, center, points, 0.5, seed) {
        let dirs = random_directions(problem, 3, &mut rng);
        let c = finite_diff_check(problem, &x, &dirs);
        worst.jvp_rel_error = worst.jvp_rel_error.max(c.jvp_rel_error);
        worst.adjoint_rel_error = worst.adjoint_rel_error.max(c.adjoint_rel_error);
    }
    worst
}

/// Per-step audit of an LM run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepAudit {
    pub steps: usize,
    /// Smallest `F_k − ((1−θ)/2)μ‖s‖² − F_{k+1}`, scaled by `1 + |F_k|`.
    pub min_descent_slack: f64,
    /// Largest `ω̄_{k,μ}(x_{k+1}) − θμ‖s‖`.
    pub max_membership_excess: f64,
    /// `false` if any step left `dom g` or the exact measure was unavailable.
    pub feasible: bool,
    pub exact_measure: bool,
}

impl StepAudit {
    fn new() -> Self {
        Self {
            steps: 0,
            min_descent_slack: f64::INFINITY,
            max_membership_excess: f64::NEG_INFINITY,
            feasible: true,
            exact_measure: true,
        }
    }

    /// Records one accepted step.
    pub fn observe(&mut self, ev: &StepEvent<'_, '_>) {
        self.steps += 1;
        let step = linalg::dist(ev.x_next, ev.model.base_point());
        let slack = ev.f_prev - 0.5 * (1.0 - ev.theta) * ev.mu * step * step - ev.f_next;
        self.min_descent_slack = self.min_descent_slack.min(slack / (1.0 + ev.f_prev.abs()));
        let reg = ev.model.problem().regularizer();
        if !reg.value(ev.x_next).is_finite() {
            self.feasible = false;
        }
        // audits go on a scratch ledger so they never show up in run costs
        let mut scratch = OracleLedger::new();
        match model_stationarity(ev.model, ev.x_next, &mut scratch) {
            Ok(w) => {
                let excess = w - ev.theta * ev.mu * step;
                self.max_membership_excess = self.max_membership_excess.max(excess);
            }
            Err(_) => self.exact_measure = false,
        }
    }
}

/// Runs LM while auditing every accepted step.
pub fn audited_lm(
    problem: &CompositeProblem,
    x0: &[f64],
    config: &LmConfig,
) -> Result<(SolveOutcome, StepAudit)> {
    let mut audit = StepAudit::new();
    let out = lm_solve_observed(problem, x0, config, |ev| audit.observe(ev))?;
    Ok((out, audit))
}

/// The full invariant suite for one problem and start. Also hands back the
/// audited run.
pub fn verify_problem(
    problem: &CompositeProblem,
    x0: &[f64],
    config: &LmConfig,
    seed: u64,
) -> Result<(Vec<CheckRecord>, SolveOutcome)> {
    let oracle = check_oracles(problem, x0, 20, seed);
    let (out, audit) = audited_lm(problem, x0, config)?;
    let mut records = vec![
        CheckRecord::at_most("adjoint_identity", oracle.adjoint_rel_error, 1e-10),
        CheckRecord::at_most("jvp_finite_difference", oracle.jvp_rel_error, 1e-5),
        CheckRecord::at_most(
            "descent_inequality",
            -audit.min_descent_slack.min(0.0),
            1e-12,
        ),
    ];
    if audit.exact_measure {
        records.push(CheckRecord::at_most(
            "subproblem_membership",
            audit.max_membership_excess.max(0.0),
            1e-10,
        ));
    }
    records.push(CheckRecord {
        name: "iterates_in_domain".into(),
        passed: audit.feasible,
        value: if audit.feasible { 0.0 } else { 1.0 },
        tolerance: 0.0,
    });
    let f = out.trace.objective_values();
    let worst_rise = f
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    records.push(CheckRecord::at_most("objective_monotone", worst_rise, 0.0));
    records.push(CheckRecord::at_most(
        "mu_bracketing",
        mu_bracket_violation(&out, config.rho_min),
        1e-12,
    ));
    let recount = out.ledger.recompute_cost();
    records.push(CheckRecord::at_most(
        "ledger_recount",
        (recount as f64 - out.ledger.cost() as f64).abs(),
        0.0,
    ));
    Ok((records, out))
}

/// Largest relative violation of `ρ_min√Δ_k ≤ μ_k ≤ ρ_final√Δ_k`.
fn mu_bracket_violation(out: &SolveOutcome, rho_min: f64) -> f64 {
    let rho_final = out.trace.last().rho;
    out.trace
        .rows
        .windows(2)
        .map(|w| {
            let root = w[0].delta.sqrt();
            let (lo, hi, mu) = (rho_min * root, rho_final * root, w[1].mu);
            ((lo - mu).max(mu - hi) / mu).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// First `k` with `|F(x_k) − value| ≤ tol`.
pub fn first_hit(out: &SolveOutcome, value: f64, tol: f64) -> Option<usize> {
    out.trace
        .rows
        .iter()
        .find(|r| (r.f - value).abs() <= tol)
        .map(|r| r.k)
}
