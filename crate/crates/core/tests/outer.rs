use std::sync::Arc;

use proxlm::lm::{rho_backtrack_count, rho_threshold};
use proxlm::problems::{
    gaussian_vector, make_linear_ls, make_rosenbrock, make_shifted_square_unconstrained,
    make_toy_interval, matrix_with_singular_values, ProblemSpec,
};
use proxlm::verify::{audited_lm, verify_problem};
use proxlm::{
    dp_solve, linalg, lm_solve, lm_solve_observed, pg_solve, CompositeProblem, DpConfig, LmConfig,
    OracleLedger, PgConfig, SolveError, Status, Subsolver,
};

fn bundled() -> Vec<(CompositeProblem, Vec<f64>)> {
    let specs = [
        ProblemSpec::Rosenbrock2,
        ProblemSpec::RosenbrockNd { d: 10 },
        ProblemSpec::ToyInterval,
        ProblemSpec::NmfSynthetic {
            p: 8,
            q: 10,
            r: 2,
            lambda: 0.01,
            n_obs: 50,
            seed: 3,
            noise: 0.05,
        },
        ProblemSpec::LinearLs {
            a: vec![vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]],
            b: vec![4.0, -2.0, 1.0],
            bounds: Some((-0.25, 0.25)),
        },
    ];
    specs
        .iter()
        .map(|s| {
            let b = s.build().unwrap();
            (b.problem, b.start)
        })
        .collect()
}

#[test]
fn already_optimal_start() {
    let p = make_rosenbrock(2);
    let out = lm_solve(&p, &[1.0, 1.0], &LmConfig::default()).unwrap();
    assert_eq!(out.trace.status, Status::Stationary);
    assert_eq!(out.trace.rows.len(), 1);
    assert_eq!(out.x, vec![1.0, 1.0]);
}

#[test]
fn rosenbrock_from_origin() {
    let p = make_rosenbrock(2);
    let out = lm_solve(&p, &[0.0, 0.0], &LmConfig::default()).unwrap();
    assert!(linalg::dist(&out.x, &[1.0, 1.0]) < 1e-6, "{:?}", out.x);
}

#[test]
fn cg_subsolver_on_rosenbrock() {
    let p = make_rosenbrock(2);
    let cfg = LmConfig {
        subsolver: Subsolver::Cg,
        ..LmConfig::default()
    };
    let out = lm_solve(&p, &[0.0, 0.0], &cfg).unwrap();
    assert!(linalg::dist(&out.x, &[1.0, 1.0]) < 1e-6, "{:?}", out.x);
}

#[test]
fn first_damping_on_rosenbrock() {
    // Δ_0 = F(0, 0) = 1, so ρ = 1 gives μ = 1
    let p = make_rosenbrock(2);
    let cfg = LmConfig {
        rho_min: 1.0,
        ..LmConfig::default()
    };
    assert_eq!(proxlm::lm::damping(1.0, 1.0).unwrap(), 1.0);
    let mut seen = Vec::new();
    lm_solve_observed(&p, &[0.0, 0.0], &cfg, |ev| {
        seen.push((ev.k, ev.delta, ev.rho, ev.mu))
    })
    .unwrap();
    let (k, delta, rho, mu) = seen[0];
    assert_eq!(k, 0);
    assert!((delta - 1.0).abs() < 1e-15);
    assert!((mu - rho * delta.sqrt()).abs() < 1e-15);
    assert!(seen
        .iter()
        .all(|s| (s.3 - s.2 * s.1.sqrt()).abs() <= 1e-15 * s.3));
}

#[test]
fn toy_terminates_finitely() {
    let p = make_toy_interval();
    let out = lm_solve(&p, &[0.5], &LmConfig::default()).unwrap();
    assert!((out.trace.last().f - 1.0).abs() <= 1e-12);
    assert!(out.trace.last().k <= 200);
}

#[test]
fn infeasible_start_rejected() {
    let p = make_toy_interval();
    assert!(matches!(
        lm_solve(&p, &[2.0], &LmConfig::default()),
        Err(SolveError::ParameterDomain(_))
    ));
}

#[test]
fn invariants_hold_on_bundled_problems() {
    for (p, x0) in bundled() {
        let (records, _) = verify_problem(&p, &x0, &LmConfig::default(), 1).unwrap();
        for r in records {
            assert!(
                r.passed,
                "{}: {} = {} > {}",
                p.name(),
                r.name,
                r.value,
                r.tolerance
            );
        }
    }
}

#[test]
fn trace_columns_behave() {
    for (p, x0) in bundled() {
        let cfg = LmConfig::default();
        let (out, audit) = audited_lm(&p, &x0, &cfg).unwrap();
        let rows = &out.trace.rows;
        let rho_final = out.trace.last().rho;
        for w in rows.windows(2) {
            assert!(w[1].delta <= w[0].delta, "{}: Δ increased", p.name());
            assert!(w[1].oracle_cost >= w[0].oracle_cost);
            assert!(w[1].rho >= w[0].rho);
            // μ_k = ρ√Δ_k with ρ_min ≤ ρ ≤ ρ_final
            let lo = cfg.rho_min * w[0].delta.sqrt();
            let hi = rho_final * w[0].delta.sqrt();
            assert!(w[1].mu >= lo * (1.0 - 1e-12) && w[1].mu <= hi * (1.0 + 1e-12));
        }
        assert_eq!(audit.steps, rows.len() - 1);
        if out.trace.status == Status::Stationary {
            assert!(out.trace.last().omega <= cfg.epsilon);
        }
        assert_eq!(out.ledger.cost(), out.ledger.recompute_cost());
        assert_eq!(out.trace.total_cost(), out.ledger.cost());
    }
}

fn backtracks_with(p: &CompositeProblem, x0: &[f64], rho_min: f64) -> (usize, f64) {
    let out = lm_solve(
        p,
        x0,
        &LmConfig {
            rho_min,
            ..LmConfig::default()
        },
    )
    .unwrap();
    (rho_backtrack_count(&out.trace), out.trace.last().rho)
}

#[test]
fn rho_above_threshold_never_backtracks() {
    // 20√2 · √2 / 0.5 = 80
    let p = make_rosenbrock(2);
    let thr = rho_threshold(20.0 * 2f64.sqrt(), 1.0, 0.5);
    assert!((thr - 80.0).abs() < 1e-12);
    assert_eq!(backtracks_with(&p, &[0.0, 0.0], thr).0, 0);
    let toy = make_toy_interval();
    let thr = rho_threshold(2.0, 2.0, 0.5);
    assert_eq!(thr, 8.0);
    assert_eq!(backtracks_with(&toy, &[0.5], thr).0, 0);
}

#[test]
fn rho_increases_are_bounded() {
    for (p, x0, thr) in [
        (make_rosenbrock(2), vec![0.0, 0.0], 80.0),
        (make_rosenbrock(6), vec![0.5; 6], 80.0),
        (make_toy_interval(), vec![0.5], 8.0),
    ] {
        let (n, rho) = backtracks_with(&p, &x0, thr / 8.0);
        assert!(n <= 3, "{}: {n} increases", p.name());
        assert!(rho <= 2.0 * thr);
    }
}

#[test]
fn pg_quadratic_single_step() {
    // H(x) = ½x², L = 1 lands exactly on 0
    let p = make_linear_ls(1, 1, vec![1.0], vec![0.0], None);
    let cfg = PgConfig {
        l_min: 1.0,
        record_iterates: true,
        ..PgConfig::default()
    };
    let out = pg_solve(&p, &[1.0], &cfg).unwrap();
    let it = out.trace.iterates.as_ref().unwrap();
    assert_eq!(it[1], vec![0.0]);
    assert_eq!(out.trace.total_backtracks(), 0);
    assert_eq!(out.trace.status, Status::Stationary);
}

#[test]
fn pg_stationary_start() {
    let p = make_rosenbrock(2);
    let out = pg_solve(&p, &[1.0, 1.0], &PgConfig::default()).unwrap();
    assert_eq!(out.trace.rows.len(), 1);
    assert_eq!(out.trace.status, Status::Stationary);
}

#[test]
fn pg_costs_more_than_lm_on_rosenbrock() {
    let p = make_rosenbrock(2);
    let lm = lm_solve(&p, &[0.0, 0.0], &LmConfig::default()).unwrap();
    let pg = pg_solve(&p, &[0.0, 0.0], &PgConfig::default()).unwrap();
    let lm_cost = lm.trace.cost_to_reach(1e-4).unwrap();
    let pg_cost = pg.trace.cost_to_reach(1e-4).unwrap();
    assert!(pg_cost > lm_cost, "pg {pg_cost} vs lm {lm_cost}");
}

#[test]
fn pg_monotone_and_backtracks_bounded() {
    let a = matrix_with_singular_values(6, &[10.0, 3.0, 1.0], 9);
    let p = make_linear_ls(6, 3, a, gaussian_vector(6, 10), Some((-1.0, 1.0)));
    // ∇H is σ²-Lipschitz
    let lh: f64 = 100.0;
    let l_min = 1e-3;
    let out = pg_solve(
        &p,
        &[0.0; 3],
        &PgConfig {
            l_min,
            ..PgConfig::default()
        },
    )
    .unwrap();
    let f = out.trace.objective_values();
    assert!(f
        .windows(2)
        .all(|w| w[1] <= w[0] + linalg::roundoff_slack(w[0])));
    let bound = (lh / l_min).log2().ceil() as usize + 1;
    assert!(out.trace.total_backtracks() <= bound);
}

#[test]
fn dp_toy_first_step() {
    let p = make_shifted_square_unconstrained();
    let cfg = DpConfig {
        mu_fixed: 2.0,
        theta: 1e-10,
        max_iters: 1,
        record_iterates: true,
        ..DpConfig::default()
    };
    let out = dp_solve(&p, &[2.0], &cfg).unwrap();
    let x1 = &out.trace.iterates.as_ref().unwrap()[1];
    assert!((x1[0] - 14.0 / 9.0).abs() < 1e-6, "{x1:?}");
}

#[test]
fn dp_keeps_certificates() {
    let p = make_rosenbrock(4);
    let cfg = DpConfig {
        mu_fixed: 0.1,
        l: 10.0,
        ..DpConfig::default()
    };
    let out = dp_solve(&p, &[0.5; 4], &cfg).unwrap();
    assert!(matches!(
        out.trace.status,
        Status::Stationary | Status::DeltaFloor
    ));
    assert!(out.trace.rows.iter().skip(1).all(|r| r.mu == 0.1));
}

#[test]
fn budget_stops_runs() {
    let p = make_rosenbrock(2);
    for budget in [0, 50] {
        let cfg = LmConfig {
            budget: Some(budget),
            ..LmConfig::default()
        };
        let out = lm_solve(&p, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(out.trace.status, Status::BudgetExhausted);
    }
    let out = pg_solve(
        &p,
        &[0.0, 0.0],
        &PgConfig {
            budget: Some(0),
            ..PgConfig::default()
        },
    )
    .unwrap();
    assert_eq!(out.trace.status, Status::BudgetExhausted);
}

#[test]
fn stall_is_reported_as_status() {
    let p = make_rosenbrock(2);
    let mut cfg = LmConfig::default();
    cfg.apg.max_inner_iters = Some(1);
    let out = lm_solve(&p, &[0.0, 0.0], &cfg).unwrap();
    assert_eq!(out.trace.status, Status::SubproblemStall);
}

#[test]
fn runs_are_deterministic() {
    let p = make_rosenbrock(3);
    let a = lm_solve(&p, &[0.5; 3], &LmConfig::default()).unwrap();
    let b = lm_solve(&p, &[0.5; 3], &LmConfig::default()).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.trace.write_csv(&mut ca, false).unwrap();
    b.trace.write_csv(&mut cb, false).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn ledger_is_shared_with_problem_oracles() {
    let p = Arc::new(make_rosenbrock(2));
    let mut l = OracleLedger::new();
    p.grad_smooth_part(&[0.0, 0.0], &mut l).unwrap();
    // residual 1 + linearize 2 + vjp 1
    assert_eq!(l.cost(), 4);
}
