//! The damped linearized model at a base point `x_k`:
//!
//! `H̄(x) = h(c(x_k) + ∇c(x_k)(x − x_k)) + (μ/2)‖x − x_k‖²`
//!
//! and `F̄(x) = g(x) + H̄(x)`. The Jacobian at `x_k` is only touched through
//! products, each charged to the caller's ledger.

use crate::error::{Result, SolveError};
use crate::ledger::{Oracle, OracleLedger};
use crate::linalg;
use crate::problem::{CompositeProblem, EvalPoint};

/// A model evaluation: the point, the linearized residual there, and `H̄`.
#[derive(Debug, Clone)]
pub struct ModelPoint {
    pub x: Vec<f64>,
    pub linear_residual: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct LinearizedModel<'p> {
    problem: &'p CompositeProblem,
    base: EvalPoint,
    mu: f64,
}

impl<'p> LinearizedModel<'p> {
    pub(crate) fn new(problem: &'p CompositeProblem, base: EvalPoint, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self { problem, base, mu })
    }

    pub fn problem(&self) -> &'p CompositeProblem {
        self.problem
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Changes the damping; the cached linearization is μ-independent.
    pub fn set_mu(&mut self, mu: f64) -> Result<()> {
        check_mu(mu)?;
        self.mu = mu;
        Ok(())
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base.x
    }

    pub fn base(&self) -> &EvalPoint {
        &self.base
    }

    pub fn residual_at_base(&self) -> &[f64] {
        &self.base.residual
    }

    pub fn dim(&self) -> usize {
        self.base.x.len()
    }

    /// `∇c(x_k) u`. One JVP.
    pub fn jvp(&self, u: &[f64], ledger: &mut OracleLedger) -> Vec<f64> {
        ledger.charge(Oracle::JvpApply);
        self.problem.residual_map().jvp(&self.base.x, u)
    }

    /// `∇c(x_k)ᵀ v`. One VJP.
    pub fn vjp(&self, v: &[f64], ledger: &mut OracleLedger) -> Vec<f64> {
        ledger.charge(Oracle::VjpApply);
        self.problem.residual_map().vjp(&self.base.x, v)
    }

    /// Evaluates `H̄` at `x` (one JVP, one loss evaluation).
    pub fn eval(&self, x: &[f64], ledger: &mut OracleLedger) -> Result<ModelPoint> {
        let step = linalg::sub(x, &self.base.x);
        let mut w = self.jvp(&step, ledger);
        for (wi, ci) in w.iter_mut().zip(&self.base.residual) {
            *wi += ci;
        }
        ledger.charge(Oracle::LossEval);
        let value = self.problem.loss().value(&w) + 0.5 * self.mu * linalg::norm_sq(&step);
        if !value.is_finite() {
            return Err(SolveError::NumericalFailure {
                what: "model value",
                point: x.to_vec(),
            });
        }
        Ok(ModelPoint {
            x: x.to_vec(),
            linear_residual: w,
            value,
        })
    }

    /// `∇H̄` at an evaluated model point (one VJP).
    pub fn grad_at(&self, point: &ModelPoint, ledger: &mut OracleLedger) -> Result<Vec<f64>> {
        ledger.charge(Oracle::LossGrad);
        let dh = self.problem.loss().grad(&point.linear_residual);
        let mut grad = self.vjp(&dh, ledger);
        for ((gi, xi), bi) in grad.iter_mut().zip(&point.x).zip(&self.base.x) {
            *gi += self.mu * (xi - bi);
        }
        if !linalg::all_finite(&grad) {
            return Err(SolveError::NumericalFailure {
                what: "model gradient",
                point: point.x.clone(),
            });
        }
        Ok(grad)
    }

    /// `H̄(x)`.
    pub fn model_value(&self, x: &[f64], ledger: &mut OracleLedger) -> Result<f64> {
        Ok(self.eval(x, ledger)?.value)
    }

    /// `∇H̄(x) = ∇c(x_k)ᵀ∇h(c(x_k) + ∇c(x_k)(x − x_k)) + μ(x − x_k)`.
    pub fn model_grad(&self, x: &[f64], ledger: &mut OracleLedger) -> Result<Vec<f64>> {
        let p = self.eval(x, ledger)?;
        self.grad_at(&p, ledger)
    }

    /// `F̄(x) = g(x) + H̄(x)`.
    pub fn model_objective(&self, x: &[f64], ledger: &mut OracleLedger) -> Result<f64> {
        Ok(self.problem.regularizer().value(x) + self.model_value(x, ledger)?)
    }

    /// `∇H̄(x_k) = ∇H(x_k)`, using the cached residual (one VJP, no JVP).
    pub fn grad_at_base(&self, ledger: &mut OracleLedger) -> Result<Vec<f64>> {
        let p = ModelPoint {
            x: self.base.x.clone(),
            linear_residual: self.base.residual.clone(),
            value: self.base.h,
        };
        self.grad_at(&p, ledger)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(SolveError::ParameterDomain(format!(
            "damping must be positive and finite, got {mu}"
        )))
    }
}
