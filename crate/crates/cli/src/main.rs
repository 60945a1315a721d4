mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use proxlm::problems::{catalog, CorruptedAdjoint, ProblemSpec};
use proxlm::verify::{first_hit, verify_problem};
use proxlm::{dp_solve, lm_solve, pg_solve, CompositeProblem, LmConfig, SolveOutcome, Status};
use rayon::prelude::*;
use serde::Serialize;

use config::{expand, ExperimentConfig, RunSpec, SolverGrid};

#[derive(Parser)]
#[command(name = "proxlm", version, about = "Generalized Levenberg-Marquardt benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver and grid point in a config.
    Run {
        config: PathBuf,
        /// Stationarity tolerance (overrides the config).
        #[arg(long)]
        eps: Option<f64>,
        /// Weighted oracle-cost budget per run (overrides the config).
        #[arg(long)]
        budget: Option<u64>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append iterate coordinates to every CSV.
        #[arg(long)]
        log_iterates: bool,
    },
    /// Check oracle and solver invariants on the configured problem.
    Verify { config: PathBuf },
    /// List the bundled problem kinds.
    ListProblems,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            eps,
            budget,
            out,
            log_iterates,
        } => load(&config).and_then(|mut cfg| {
            if let Some(e) = eps {
                cfg.epsilon = e;
            }
            if budget.is_some() {
                cfg.budget = budget;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.log_iterates |= log_iterates;
            cfg.validate().map_err(usage)?;
            run(&cfg).map_err(Failure::Runtime)
        }),
        Command::Verify { config } => {
            load(&config).and_then(|cfg| verify(&cfg).map_err(Failure::Runtime))
        }
        Command::ListProblems => {
            for (kind, about) in catalog() {
                println!("{kind:<15} {about}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(e: anyhow::Error) -> Failure {
    Failure::Usage(e)
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(usage)
}

fn build_problem(cfg: &ExperimentConfig) -> anyhow::Result<(CompositeProblem, Vec<f64>)> {
    let built = cfg.problem.build()?;
    let mut problem = built.problem;
    if cfg.corrupt_vjp {
        problem = CorruptedAdjoint::wrap(problem);
    }
    let start = cfg.start.clone().unwrap_or(built.start);
    if start.len() != problem.dim_x() {
        anyhow::bail!(
            "start has {} entries but the problem has dimension {}",
            start.len(),
            problem.dim_x()
        );
    }
    Ok((problem, start))
}

#[derive(Debug, Serialize)]
struct RunSummary {
    label: String,
    csv: Option<String>,
    #[serde(flatten)]
    spec: RunSpec,
    status: Option<Status>,
    error: Option<String>,
    iterations: Option<usize>,
    final_f: Option<f64>,
    final_omega: Option<f64>,
    total_cost: Option<u64>,
    cost_to_tolerance: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Best {
    solver: &'static str,
    label: String,
    cost_to_tolerance: u64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    problem: &'a ProblemSpec,
    epsilon: f64,
    budget: Option<u64>,
    target_f: Option<f64>,
    seed: u64,
    runs: Vec<RunSummary>,
    best: Vec<Best>,
    lowest_cost_solver: Option<&'static str>,
}

fn solve(spec: &RunSpec, problem: &CompositeProblem, x0: &[f64]) -> proxlm::Result<SolveOutcome> {
    match spec {
        RunSpec::Lm(c) => lm_solve(problem, x0, c),
        RunSpec::Pg(c) => pg_solve(problem, x0, c),
        RunSpec::Dp(c) => dp_solve(problem, x0, c),
    }
}

fn cost_to_tolerance(out: &SolveOutcome, cfg: &ExperimentConfig) -> Option<u64> {
    match cfg.target_f {
        Some(t) => out.trace.cost_to_reach(t),
        None => {
            let hit = out.trace.rows.iter().find(|r| r.omega <= cfg.epsilon);
            match hit {
                Some(r) => Some(r.oracle_cost),
                // at the global lower bound the point is optimal
                None if out.trace.status == Status::DeltaFloor => Some(out.trace.total_cost()),
                None => None,
            }
        }
    }
}

fn run(cfg: &ExperimentConfig) -> anyhow::Result<ExitCode> {
    let (problem, x0) = build_problem(cfg)?;
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;
    let specs = expand(cfg);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;

    let runs: Vec<RunSummary> = pool.install(|| {
        specs
            .into_par_iter()
            .map(|spec| run_one(spec, &problem, &x0, cfg))
            .collect::<anyhow::Result<_>>()
    })?;

    let mut best: Vec<Best> = Vec::new();
    for r in &runs {
        let Some(c) = r.cost_to_tolerance else { continue };
        let solver = r.spec.solver();
        match best.iter_mut().find(|b| b.solver == solver) {
            Some(b) if c < b.cost_to_tolerance => {
                b.label = r.label.clone();
                b.cost_to_tolerance = c;
            }
            Some(_) => {}
            None => best.push(Best {
                solver,
                label: r.label.clone(),
                cost_to_tolerance: c,
            }),
        }
    }
    let lowest = best.iter().min_by_key(|b| b.cost_to_tolerance).map(|b| b.solver);
    let summary = Summary {
        problem: &cfg.problem,
        epsilon: cfg.epsilon,
        budget: cfg.budget,
        target_f: cfg.target_f,
        seed: cfg.seed,
        runs,
        best,
        lowest_cost_solver: lowest,
    };
    let path = cfg.output_dir.join("summary.json");
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &summary)?;

    for r in &summary.runs {
        match (&r.status, &r.error) {
            (Some(s), _) => println!(
                "{:<28} {:<16} F={:<12.4e} cost={:<9} to-tol={}",
                r.label,
                format!("{s:?}"),
                r.final_f.unwrap_or(f64::NAN),
                r.total_cost.unwrap_or(0),
                r.cost_to_tolerance.map_or("-".into(), |c| c.to_string())
            ),
            (None, Some(e)) => println!("{:<28} error: {e}", r.label),
            (None, None) => {}
        }
    }
    if let Some(s) = lowest {
        println!("lowest cost to tolerance: {s}");
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn run_one(
    spec: RunSpec,
    problem: &CompositeProblem,
    x0: &[f64],
    cfg: &ExperimentConfig,
) -> anyhow::Result<RunSummary> {
    let label = spec.label();
    let outcome = solve(&spec, problem, x0);
    let mut summary = RunSummary {
        label: label.clone(),
        csv: None,
        spec,
        status: None,
        error: None,
        iterations: None,
        final_f: None,
        final_omega: None,
        total_cost: None,
        cost_to_tolerance: None,
    };
    match outcome {
        Ok(out) => {
            let name = format!("{label}.csv");
            let path = cfg.output_dir.join(&name);
            let file =
                File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
            out.trace.write_csv(BufWriter::new(file), true)?;
            let last = out.trace.last();
            summary.csv = Some(name);
            summary.status = Some(out.trace.status);
            summary.iterations = Some(last.k);
            summary.final_f = Some(last.f);
            summary.final_omega = Some(last.omega).filter(|w| w.is_finite());
            summary.total_cost = Some(out.ledger.cost());
            summary.cost_to_tolerance = cost_to_tolerance(&out, cfg);
        }
        Err(e) => summary.error = Some(e.to_string()),
    }
    Ok(summary)
}

fn verify(cfg: &ExperimentConfig) -> anyhow::Result<ExitCode> {
    let (problem, x0) = build_problem(cfg)?;
    let lm = cfg
        .solvers
        .iter()
        .find_map(|s| match s {
            SolverGrid::Lm { rho_min, options } => Some(LmConfig {
                rho_min: rho_min[0],
                ..options.clone()
            }),
            _ => None,
        })
        .unwrap_or_default();
    let lm = LmConfig {
        epsilon: cfg.epsilon,
        budget: cfg.budget,
        ..lm
    };
    let (records, out) = verify_problem(&problem, &x0, &lm, cfg.seed)?;
    let mut all = true;
    for r in &records {
        all &= r.passed;
        println!(
            "{} {:<24} {:.3e} (tolerance {:.0e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.value,
            r.tolerance
        );
    }
    if matches!(cfg.problem, ProblemSpec::ToyInterval) {
        match first_hit(&out, 1.0, 1e-12) {
            Some(k) => println!("INFO finite_termination     F(x_k) = 1 reached at k = {k}"),
            None => println!("INFO finite_termination     F(x_k) = 1 not reached"),
        }
    }
    println!(
        "status {:?} after {} iterations, F = {:.6e}",
        out.trace.status,
        out.trace.last().k,
        out.trace.last().f
    );
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
