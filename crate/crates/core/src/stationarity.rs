//! First-order stationarity measures.
//!
//! `ω(x) = min_{p ∈ ∂g(x)} ‖p + ∇H(x)‖ = dist(−∇H(x), ∂g(x))`, and the same
//! with the model gradient for `ω̄`. For regularizers without a closed-form
//! subdifferential the prox-gradient residual is used instead.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolveError};
use crate::ledger::OracleLedger;
use crate::linalg;
use crate::model::LinearizedModel;
use crate::regularizer::Regularizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarityMeasure {
    /// Exact distance to the subdifferential.
    Exact,
    /// `s‖x − prox(x − ∇H/s, s)‖`.
    ProxResidual,
}

/// `dist(−grad, ∂g(x))` for separable `g`.
pub fn stationarity(reg: &dyn Regularizer, x: &[f64], grad: &[f64]) -> Result<f64> {
    let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
    reg.subdiff_distance(x, &neg).ok_or_else(|| {
        SolveError::UnsupportedRegularizer(format!(
            "{} has no closed-form subdifferential distance",
            reg.name()
        ))
    })
}

/// Scaled prox-gradient residual `s‖x − prox(x − grad/s, s)‖`.
pub fn prox_gradient_residual(reg: &dyn Regularizer, x: &[f64], grad: &[f64], s: f64) -> f64 {
    let mut shifted = x.to_vec();
    linalg::axpy(-1.0 / s, grad, &mut shifted);
    let z = reg.prox(&shifted, s);
    s * linalg::dist(x, &z)
}

/// Exact measure when available, otherwise the prox residual with weight `s`.
pub fn measure(
    reg: &dyn Regularizer,
    x: &[f64],
    grad: &[f64],
    s: f64,
) -> (f64, StationarityMeasure) {
    match stationarity(reg, x, grad) {
        Ok(w) => (w, StationarityMeasure::Exact),
        Err(_) => (
            prox_gradient_residual(reg, x, grad, s),
            StationarityMeasure::ProxResidual,
        ),
    }
}

/// Exact `ω̄_{k,μ}(x)` against the model gradient.
pub fn model_stationarity(
    model: &LinearizedModel<'_>,
    x: &[f64],
    ledger: &mut OracleLedger,
) -> Result<f64> {
    let grad = model.model_grad(x, ledger)?;
    stationarity(model.problem().regularizer(), x, &grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizer::{BallIndicator, NonNegative, Zero};

    #[test]
    fn unconstrained_is_gradient_norm() {
        assert_eq!(stationarity(&Zero, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn orthant_example() {
        let w = stationarity(&NonNegative, &[0.0, 2.0], &[-3.0, 1.0]).unwrap();
        assert!((w - 10.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_has_zero_measure() {
        // x = 0 on the orthant with ∇H ≥ 0 is stationary
        assert_eq!(
            stationarity(&NonNegative, &[0.0, 0.0], &[1.0, 2.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn non_separable_falls_back() {
        let ball = BallIndicator { radius: 1.0 };
        assert!(matches!(
            stationarity(&ball, &[0.0], &[1.0]),
            Err(SolveError::UnsupportedRegularizer(_))
        ));
        let (w, kind) = measure(&ball, &[1.0, 0.0], &[-1.0, 0.0], 2.0);
        // pushing outward against the boundary is stationary
        assert_eq!(kind, StationarityMeasure::ProxResidual);
        assert!(w.abs() < 1e-15);
        let (w, _) = measure(&ball, &[0.0, 0.0], &[0.5, 0.0], 2.0);
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prox_residual_equals_gradient_norm_without_regularizer() {
        let w = prox_gradient_residual(&Zero, &[1.0, 1.0], &[3.0, 4.0], 7.0);
        assert!((w - 5.0).abs() < 1e-14);
    }
}
