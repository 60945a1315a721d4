use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proxlm::apg::{apg_solve, apg_solve_from, backtrack_condition, cg_solve, ApgConfig};
use proxlm::problems::{
    gaussian_vector, make_linear_ls, make_shifted_square, make_shifted_square_unconstrained,
    matrix_with_singular_values,
};
use proxlm::stationarity::model_stationarity;
use proxlm::{
    linalg, BoxIndicator, CompositeProblem, LinearizedModel, OracleLedger, SolveError, Zero,
};

const FOURTEEN_NINTHS: f64 = 14.0 / 9.0;

fn toy_model(problem: &CompositeProblem, mu: f64) -> LinearizedModel<'_> {
    problem
        .linearize_fresh(&[2.0], mu, &mut OracleLedger::new())
        .unwrap()
}

fn tight(theta: f64) -> ApgConfig {
    ApgConfig {
        theta,
        ..ApgConfig::default()
    }
}

#[test]
fn model_gradient_closed_form() {
    // c(2) = 2, c'(2) = 4: ∇H̄(x) = 4(2 + 4(x − 2)) + 2(x − 2)
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    let mut l = OracleLedger::new();
    for x in [-1.0, 0.0, 1.5, 2.0, 3.25] {
        let g = m.model_grad(&[x], &mut l).unwrap()[0];
        let expected = 4.0 * (2.0 + 4.0 * (x - 2.0)) + 2.0 * (x - 2.0);
        assert!((g - expected).abs() < 1e-12, "x={x}: {g} vs {expected}");
    }
    assert!(m.model_grad(&[FOURTEEN_NINTHS], &mut l).unwrap()[0].abs() < 1e-13);
}

#[test]
fn model_matches_objective_at_base() {
    let p = proxlm::problems::make_rosenbrock(4);
    let x = [0.3, -0.7, 1.1, 0.2];
    let mut l = OracleLedger::new();
    let m = p.linearize_fresh(&x, 3.0, &mut l).unwrap();
    let h = p.evaluate(&x, &mut l).unwrap().h;
    assert_eq!(m.model_value(&x, &mut l).unwrap(), h);
    let gm = m.model_grad(&x, &mut l).unwrap();
    let gh = p.grad_smooth_part(&x, &mut l).unwrap();
    assert!(linalg::dist(&gm, &gh) < 1e-12);
}

#[test]
fn model_gradient_matches_finite_differences() {
    let p = proxlm::problems::make_rosenbrock(5);
    let xk = [0.1, 0.4, -0.3, 0.9, 1.2];
    let mut l = OracleLedger::new();
    let m = p.linearize_fresh(&xk, 0.7, &mut l).unwrap();
    let x = [0.2, 0.1, -0.5, 1.0, 0.8];
    let g = m.model_grad(&x, &mut l).unwrap();
    let h = 1e-6;
    for i in 0..5 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h;
        xm[i] -= h;
        let fd =
            (m.model_value(&xp, &mut l).unwrap() - m.model_value(&xm, &mut l).unwrap()) / (2.0 * h);
        assert!(
            (fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()),
            "coord {i}: {fd} vs {}",
            g[i]
        );
    }
}

#[test]
fn model_eval_costs_one_jvp() {
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    let mut l = OracleLedger::new();
    m.model_value(&[1.0], &mut l).unwrap();
    assert_eq!(l.cost(), 1);
    m.model_grad(&[1.0], &mut l).unwrap();
    assert_eq!(l.cost(), 3);
}

#[test]
fn stationary_base_returns_immediately() {
    let p = proxlm::problems::make_rosenbrock(2);
    let xk = [1.0, 1.0];
    let m = p
        .linearize_fresh(&xk, 1.0, &mut OracleLedger::new())
        .unwrap();
    let (x, rep) = apg_solve(&m, &ApgConfig::default(), &mut OracleLedger::new()).unwrap();
    assert_eq!(x, xk.to_vec());
    assert_eq!(rep.residual_final, 0.0);
    assert_eq!(rep.inner_iters, 1);
    let (x, rep) = cg_solve(&m, &mut OracleLedger::new(), 0.5).unwrap();
    assert_eq!(x, xk.to_vec());
    assert_eq!(rep.iterations, 0);
}

#[test]
fn apg_toy_minimizer() {
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    let (x, _) = apg_solve(&m, &tight(1e-10), &mut OracleLedger::new()).unwrap();
    assert!((x[0] - FOURTEEN_NINTHS).abs() < 1e-6, "{}", x[0]);
}

#[test]
fn apg_default_theta_is_only_a_certificate() {
    // at θ = 0.5 the answer is certified, not exact
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    let mut l = OracleLedger::new();
    let (x, _) = apg_solve(&m, &ApgConfig::default(), &mut l).unwrap();
    let w = model_stationarity(&m, &x, &mut l).unwrap();
    assert!(w <= 0.5 * 2.0 * (x[0] - 2.0).abs() + 1e-12);
    assert!((x[0] - FOURTEEN_NINTHS).abs() < 0.5 * (2.0 - FOURTEEN_NINTHS));
}

#[test]
fn cg_toy_one_iteration() {
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    let (x, rep) = cg_solve(&m, &mut OracleLedger::new(), 0.5).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!((x[0] - FOURTEEN_NINTHS).abs() < 1e-12);
}

#[test]
fn cg_charges_one_jvp_and_vjp_per_iteration() {
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    let mut l = OracleLedger::new();
    cg_solve(&m, &mut l, 0.5).unwrap();
    // start gradient (1 vjp), one iteration (jvp + vjp), confirmation (jvp + vjp)
    assert_eq!(l.count(proxlm::Oracle::JvpApply), 2);
    assert_eq!(l.count(proxlm::Oracle::VjpApply), 3);
}

#[test]
fn cg_rejects_regularized_problems() {
    let p = make_shifted_square(1.0, Arc::new(BoxIndicator::new(-1.0, 1.0)));
    let m = p
        .linearize_fresh(&[0.5], 1.0, &mut OracleLedger::new())
        .unwrap();
    assert!(matches!(
        cg_solve(&m, &mut OracleLedger::new(), 0.5),
        Err(SolveError::UnsupportedRegularizer(_))
    ));
}

fn dense_step(a: &[f64], rows: usize, cols: usize, b: &[f64], xk: &[f64], mu: f64) -> Vec<f64> {
    let am = DMatrix::from_row_slice(rows, cols, a);
    let r = &am * DVector::from_column_slice(xk) - DVector::from_column_slice(b);
    let lhs = am.transpose() * &am + DMatrix::identity(cols, cols) * mu;
    let rhs = -(am.transpose() * r);
    let s = lhs.cholesky().expect("positive definite").solve(&rhs);
    xk.iter().zip(s.iter()).map(|(x, si)| x + si).collect()
}

#[test]
fn five_by_five_matches_direct_solve() {
    let a = matrix_with_singular_values(5, &[4.0, 3.0, 2.0, 1.5, 1.0], 21);
    let b = gaussian_vector(5, 22);
    let xk = gaussian_vector(5, 23);
    let mu = 0.5;
    let p = make_linear_ls(5, 5, a.clone(), b.clone(), None);
    let m = p
        .linearize_fresh(&xk, mu, &mut OracleLedger::new())
        .unwrap();
    let exact = dense_step(&a, 5, 5, &b, &xk, mu);

    let (x_cg, _) = cg_solve(&m, &mut OracleLedger::new(), 1e-12).unwrap();
    assert!(
        linalg::dist(&x_cg, &exact) < 1e-8,
        "{}",
        linalg::dist(&x_cg, &exact)
    );
    let (x_apg, _) = apg_solve(&m, &tight(1e-10), &mut OracleLedger::new()).unwrap();
    assert!(
        linalg::dist(&x_apg, &exact) < 1e-6,
        "{}",
        linalg::dist(&x_apg, &exact)
    );
}

#[test]
fn backtrack_condition_examples() {
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    let mut l = OracleLedger::new();
    assert!(backtrack_condition(&m, &[1.3], &[1.3], 1e-3, &mut l).unwrap());
    // the model is quadratic with curvature 16 + μ = 18
    assert!(backtrack_condition(&m, &[2.0], &[1.5], 18.0, &mut l).unwrap());
    assert!(!backtrack_condition(&m, &[2.0], &[1.5], 17.9, &mut l).unwrap());
    assert!(!backtrack_condition(&m, &[2.0], &[1.5], 2.0 * (1.0 + 1e-6), &mut l).unwrap());
}

#[test]
fn initial_curvature_must_exceed_mu() {
    let p = make_shifted_square_unconstrained();
    let m = toy_model(&p, 2.0);
    assert!(matches!(
        apg_solve_from(&m, &ApgConfig::default(), 2.0, &mut OracleLedger::new()),
        Err(SolveError::ParameterDomain(_))
    ));
}

#[test]
fn tiny_iteration_cap_reports_stall() {
    let a = matrix_with_singular_values(8, &[100.0, 30.0, 10.0, 3.0, 1.0], 4);
    let p = make_linear_ls(8, 5, a, gaussian_vector(8, 5), None);
    let m = p
        .linearize_fresh(&[0.0; 5], 1e-3, &mut OracleLedger::new())
        .unwrap();
    let cfg = ApgConfig {
        max_inner_iters: Some(2),
        ..ApgConfig::default()
    };
    match apg_solve(&m, &cfg, &mut OracleLedger::new()) {
        Err(SolveError::SubproblemStall { iters, best, .. }) => {
            assert_eq!(iters, 2);
            assert_eq!(best.len(), 5);
        }
        other => panic!("expected a stall, got {other:?}"),
    }
}

/// `‖J‖²` at the base point by power iteration on `JᵀJ`.
fn jacobian_norm_sq(m: &LinearizedModel<'_>) -> f64 {
    let mut l = OracleLedger::new();
    let mut v = vec![1.0; m.dim()];
    let mut lam = 0.0;
    for _ in 0..500 {
        let w = m.vjp(&m.jvp(&v, &mut l), &mut l);
        lam = linalg::norm(&w) / linalg::norm(&v);
        v = linalg::scale(1.0 / linalg::norm(&w), &w);
    }
    lam
}

fn random_box_problem(seed: u64) -> CompositeProblem {
    let a = matrix_with_singular_values(7, &[5.0, 2.0, 1.0, 0.3], seed);
    make_linear_ls(7, 4, a, gaussian_vector(7, seed + 1), Some((-0.5, 0.5)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certificate_implies_membership(seed in 0u64..1000, mu in 1e-3f64..10.0, theta in 0.05f64..0.95) {
        let p = random_box_problem(seed);
        let xk = p.regularizer().prox(&gaussian_vector(4, seed + 7), 1.0);
        let m = p.linearize_fresh(&xk, mu, &mut OracleLedger::new()).unwrap();
        let mut l = OracleLedger::new();
        let (x, rep) = apg_solve(&m, &tight(theta), &mut l).unwrap();
        let w = model_stationarity(&m, &x, &mut l).unwrap();
        prop_assert!(w <= theta * mu * linalg::dist(&x, &xk) + 1e-10, "ω̄={} bound={}", w, theta * mu * linalg::dist(&x, &xk));
        prop_assert!(x.iter().all(|v| (-0.5..=0.5).contains(v)));
        // η never exceeds ᾱ(μ + L_h σ²)
        let ceiling = 2.0 * (mu + jacobian_norm_sq(&m));
        prop_assert!(rep.eta_max <= ceiling * (1.0 + 1e-9), "η_max={} ceiling={}", rep.eta_max, ceiling);
    }

    #[test]
    fn nonlinear_certificate(x0 in -3.0f64..3.0, mu in 1e-2f64..5.0) {
        let p = make_shifted_square(2.0, Arc::new(Zero));
        let m = p.linearize_fresh(&[x0], mu, &mut OracleLedger::new()).unwrap();
        let mut l = OracleLedger::new();
        let (x, _) = apg_solve(&m, &ApgConfig::default(), &mut l).unwrap();
        let w = model_stationarity(&m, &x, &mut l).unwrap();
        prop_assert!(w <= 0.5 * mu * (x[0] - x0).abs() + 1e-10);
    }

    #[test]
    fn check_interval_keeps_certificate(seed in 0u64..200, interval in 1usize..6) {
        let p = random_box_problem(seed);
        let xk = vec![0.0; 4];
        let m = p.linearize_fresh(&xk, 0.1, &mut OracleLedger::new()).unwrap();
        let cfg = ApgConfig { check_interval: interval, ..ApgConfig::default() };
        let mut l = OracleLedger::new();
        let (x, rep) = apg_solve(&m, &cfg, &mut l).unwrap();
        prop_assert_eq!(rep.inner_iters % interval, 0);
        let w = model_stationarity(&m, &x, &mut l).unwrap();
        prop_assert!(w <= 0.5 * 0.1 * linalg::dist(&x, &xk) + 1e-10);
    }
}
