//! Composite problems `min_x g(x) + h(c(x))` accessed only through oracles.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Result, SolveError};
use crate::ledger::{Oracle, OracleLedger};
use crate::linalg;
use crate::loss::OuterLoss;
use crate::model::LinearizedModel;
use crate::regularizer::Regularizer;

/// The smooth inner map `c: R^d → R^n`, with its Jacobian available only
/// through products.
pub trait ResidualMap: Send + Sync + Debug {
    fn dim_x(&self) -> usize;
    fn dim_r(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Vec<f64>;

    /// `∇c(x) u`
    fn jvp(&self, x: &[f64], u: &[f64]) -> Vec<f64>;

    /// `∇c(x)ᵀ v`
    fn vjp(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
}

/// A point at which `c` (and therefore `F`) has been evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub g: f64,
    pub h: f64,
}

impl EvalPoint {
    /// `F(x) = g(x) + h(c(x))`
    pub fn objective(&self) -> f64 {
        self.g + self.h
    }
}

#[derive(Debug, Clone)]
pub struct CompositeProblem {
    name: String,
    residual: Arc<dyn ResidualMap>,
    loss: Arc<dyn OuterLoss>,
    regularizer: Arc<dyn Regularizer>,
    lipschitz_jac: Option<f64>,
    jac_norm_bound: Option<f64>,
}

impl CompositeProblem {
    pub fn new(
        name: impl Into<String>,
        residual: Arc<dyn ResidualMap>,
        loss: Arc<dyn OuterLoss>,
        regularizer: Arc<dyn Regularizer>,
    ) -> Self {
        Self {
            name: name.into(),
            residual,
            loss,
            regularizer,
            lipschitz_jac: None,
            jac_norm_bound: None,
        }
    }

    /// Records a known Lipschitz constant `L_c` of `∇c`.
    pub fn with_lipschitz_jac(mut self, lc: f64) -> Self {
        self.lipschitz_jac = Some(lc);
        self
    }

    /// Records a known bound `σ` on `‖∇c(x)‖_op`.
    pub fn with_jac_norm_bound(mut self, sigma: f64) -> Self {
        self.jac_norm_bound = Some(sigma);
        self
    }

    /// Replaces the residual map, keeping everything else.
    pub fn with_residual(mut self, residual: Arc<dyn ResidualMap>) -> Self {
        self.residual = residual;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_x(&self) -> usize {
        self.residual.dim_x()
    }

    pub fn dim_r(&self) -> usize {
        self.residual.dim_r()
    }

    pub fn residual_map(&self) -> &dyn ResidualMap {
        self.residual.as_ref()
    }

    pub fn loss(&self) -> &dyn OuterLoss {
        self.loss.as_ref()
    }

    pub fn regularizer(&self) -> &dyn Regularizer {
        self.regularizer.as_ref()
    }

    pub fn lipschitz_jac(&self) -> Option<f64> {
        self.lipschitz_jac
    }

    pub fn jac_norm_bound(&self) -> Option<f64> {
        self.jac_norm_bound
    }

    pub fn lipschitz_loss(&self) -> Option<f64> {
        self.loss.lipschitz()
    }

    /// `g* + h*`.
    pub fn lower_bound(&self) -> f64 {
        self.regularizer.infimum() + self.loss.infimum()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim_x() {
            return Err(SolveError::DimensionMismatch {
                expected: self.dim_x(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Evaluates `c(x)`, `g(x)` and `h(c(x))`. Charges one residual evaluation.
    ///
    /// Points outside `dom g` yield `g = +∞` without an error; a non-finite
    /// residual or loss value is a [`SolveError::NumericalFailure`].
    pub fn evaluate(&self, x: &[f64], ledger: &mut OracleLedger) -> Result<EvalPoint> {
        self.check_dim(x)?;
        let g = self.regularizer.value(x);
        ledger.charge(Oracle::ResidualEval);
        let residual = self.residual.eval(x);
        if !linalg::all_finite(&residual) {
            return Err(SolveError::NumericalFailure {
                what: "residual",
                point: x.to_vec(),
            });
        }
        ledger.charge(Oracle::LossEval);
        let h = self.loss.value(&residual);
        if !h.is_finite() {
            return Err(SolveError::NumericalFailure {
                what: "loss value",
                point: x.to_vec(),
            });
        }
        Ok(EvalPoint {
            x: x.to_vec(),
            residual,
            g,
            h,
        })
    }

    /// `F(x) = g(x) + h(c(x))`.
    pub fn eval_objective(&self, x: &[f64], ledger: &mut OracleLedger) -> Result<f64> {
        Ok(self.evaluate(x, ledger)?.objective())
    }

    /// `∇H(x) = ∇c(x)ᵀ∇h(c(x))` at an already evaluated point. Charges one
    /// linearization, the transpose, and one VJP.
    pub fn gradient_at(&self, point: &EvalPoint, ledger: &mut OracleLedger) -> Result<Vec<f64>> {
        ledger.charge(Oracle::Linearize);
        ledger.charge(Oracle::TransposeDerive);
        ledger.charge(Oracle::LossGrad);
        let dh = self.loss.grad(&point.residual);
        ledger.charge(Oracle::VjpApply);
        let grad = self.residual.vjp(&point.x, &dh);
        if !linalg::all_finite(&grad) {
            return Err(SolveError::NumericalFailure {
                what: "gradient",
                point: point.x.clone(),
            });
        }
        Ok(grad)
    }

    /// `∇H(x)` from scratch.
    pub fn grad_smooth_part(&self, x: &[f64], ledger: &mut OracleLedger) -> Result<Vec<f64>> {
        let point = self.evaluate(x, ledger)?;
        self.gradient_at(&point, ledger)
    }

    /// Linearizes `c` at an evaluated point and attaches damping `mu`.
    /// Charges one linearization and the (free) transpose.
    pub fn linearize<'p>(
        &'p self,
        point: &EvalPoint,
        mu: f64,
        ledger: &mut OracleLedger,
    ) -> Result<LinearizedModel<'p>> {
        ledger.charge(Oracle::Linearize);
        ledger.charge(Oracle::TransposeDerive);
        LinearizedModel::new(self, point.clone(), mu)
    }

    /// Like [`linearize`](Self::linearize) but also evaluates `c(x_k)`.
    pub fn linearize_fresh<'p>(
        &'p self,
        x: &[f64],
        mu: f64,
        ledger: &mut OracleLedger,
    ) -> Result<LinearizedModel<'p>> {
        let point = self.evaluate(x, ledger)?;
        self.linearize(&point, mu, ledger)
    }
}
