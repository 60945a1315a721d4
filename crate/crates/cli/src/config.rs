use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use proxlm::problems::ProblemSpec;
use proxlm::{DpConfig, LmConfig, PgConfig};
use serde::{Deserialize, Serialize};

/// One solver with the parameter grid to sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase", deny_unknown_fields)]
pub enum SolverGrid {
    Lm {
        #[serde(default = "default_rho_grid")]
        rho_min: Vec<f64>,
        #[serde(default)]
        options: LmConfig,
    },
    Pg {
        #[serde(default = "default_rho_grid")]
        l_min: Vec<f64>,
        #[serde(default)]
        options: PgConfig,
    },
    Dp {
        #[serde(default = "default_mu_grid")]
        mu: Vec<f64>,
        #[serde(default = "default_l_grid")]
        l: Vec<f64>,
        #[serde(default)]
        options: DpConfig,
    },
}

fn default_rho_grid() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0]
}

fn default_mu_grid() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2]
}

fn default_l_grid() -> Vec<f64> {
    vec![1e-1, 1e2, 1e5]
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Overrides the problem's documented starting point.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    pub solvers: Vec<SolverGrid>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Maximum weighted oracle cost per run.
    #[serde(default)]
    pub budget: Option<u64>,
    /// Cost-to-tolerance uses the first iterate with `F ≤ target_f` when set,
    /// otherwise the first with `ω ≤ ε`.
    #[serde(default)]
    pub target_f: Option<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub log_iterates: bool,
    /// Test fixture: perturb the VJP so `verify` must fail.
    #[serde(default)]
    pub corrupt_vjp: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.solvers.is_empty() {
            bail!("config lists no solvers");
        }
        if !(self.epsilon >= 0.0) {
            bail!("epsilon must be nonnegative");
        }
        if self.workers == Some(0) {
            bail!("workers must be positive");
        }
        for s in &self.solvers {
            let empty = match s {
                SolverGrid::Lm { rho_min, .. } => rho_min.is_empty(),
                SolverGrid::Pg { l_min, .. } => l_min.is_empty(),
                SolverGrid::Dp { mu, l, .. } => mu.is_empty() || l.is_empty(),
            };
            if empty {
                bail!("solver grid is empty: {s:?}");
            }
        }
        Ok(())
    }
}

/// A single (solver, grid point) pair, fully resolved.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "solver", content = "config", rename_all = "lowercase")]
pub enum RunSpec {
    Lm(LmConfig),
    Pg(PgConfig),
    Dp(DpConfig),
}

impl RunSpec {
    pub fn solver(&self) -> &'static str {
        match self {
            RunSpec::Lm(_) => "lm",
            RunSpec::Pg(_) => "pg",
            RunSpec::Dp(_) => "dp",
        }
    }

    /// File stem, e.g. `dp_mu=0.01_L=100`.
    pub fn label(&self) -> String {
        match self {
            RunSpec::Lm(c) => format!("lm_rho_min={}", c.rho_min),
            RunSpec::Pg(c) => format!("pg_L_min={}", c.l_min),
            RunSpec::Dp(c) => format!("dp_mu={}_L={}", c.mu_fixed, c.l),
        }
    }
}

/// Expands every grid into concrete runs, applying the top-level epsilon,
/// budget and iterate logging.
pub fn expand(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    for s in &cfg.solvers {
        match s {
            SolverGrid::Lm { rho_min, options } => {
                for &r in rho_min {
                    runs.push(RunSpec::Lm(LmConfig {
                        rho_min: r,
                        epsilon: cfg.epsilon,
                        budget: cfg.budget,
                        record_iterates: cfg.log_iterates,
                        ..options.clone()
                    }));
                }
            }
            SolverGrid::Pg { l_min, options } => {
                for &l in l_min {
                    runs.push(RunSpec::Pg(PgConfig {
                        l_min: l,
                        epsilon: cfg.epsilon,
                        budget: cfg.budget,
                        record_iterates: cfg.log_iterates,
                        ..options.clone()
                    }));
                }
            }
            SolverGrid::Dp { mu, l, options } => {
                for &m in mu {
                    for &lv in l {
                        runs.push(RunSpec::Dp(DpConfig {
                            mu_fixed: m,
                            l: lv,
                            epsilon: cfg.epsilon,
                            budget: cfg.budget,
                            record_iterates: cfg.log_iterates,
                            ..options.clone()
                        }));
                    }
                }
            }
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"kind": "rosenbrock2"}, "solvers": [{"solver": "lm"}, {"solver": "dp", "mu": [1.0], "l": [10.0]}]}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let runs = expand(&cfg);
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[5].label(), "dp_mu=1_L=10");
    }

    #[test]
    fn unknown_field_rejected() {
        let r: Result<ExperimentConfig, _> = serde_json::from_str(
            r#"{"problem": {"kind": "rosenbrock2"}, "solvers": [], "bogus": 1}"#,
        );
        assert!(r.is_err());
    }
}
