//! Generalized Levenberg–Marquardt for composite problems
//! `min_x F(x) = g(x) + h(c(x))`, with an accelerated proximal gradient
//! subproblem solver, two baselines, and benchmark instances.
//!
//! ```
//! use proxlm::{lm_solve, problems::ProblemSpec, LmConfig, Status};
//!
//! let built = ProblemSpec::Rosenbrock2.build().unwrap();
//! let out = lm_solve(&built.problem, &built.start, &LmConfig::default()).unwrap();
//! assert!(matches!(out.trace.status, Status::Stationary | Status::DeltaFloor));
//! assert!((out.x[0] - 1.0).abs() < 1e-4);
//! ```

pub mod apg;
pub mod baselines;
pub mod error;
pub mod ledger;
pub mod linalg;
pub mod lm;
pub mod loss;
pub mod model;
pub mod problem;
pub mod problems;
pub mod regularizer;
pub mod stationarity;
pub mod trace;
pub mod verify;

pub use apg::{apg_solve, apg_solve_from, cg_solve, ApgConfig, ApgReport, CgReport};
pub use baselines::{dp_solve, pg_solve, DpConfig, PgConfig};
pub use error::{Result, SolveError};
pub use ledger::{ledger_cost, Oracle, OracleLedger};
pub use lm::{lm_solve, lm_solve_observed, LmConfig, SolveOutcome, StepEvent, Subsolver};
pub use loss::{OuterLoss, PseudoHuber, SquaredNorm};
pub use model::LinearizedModel;
pub use problem::{CompositeProblem, EvalPoint, ResidualMap};
pub use regularizer::{BallIndicator, BoxIndicator, L1Norm, NonNegative, Regularizer, Zero};
pub use stationarity::{stationarity, StationarityMeasure};
pub use trace::{fitted_order, RunTrace, Status, TraceRow, CSV_HEADER};
