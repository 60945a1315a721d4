//! Smooth convex outer losses `h`.

use std::fmt::Debug;

use crate::linalg;

pub trait OuterLoss: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    fn value(&self, y: &[f64]) -> f64;

    fn grad(&self, y: &[f64]) -> Vec<f64>;

    /// `inf h`, assumed known.
    fn infimum(&self) -> f64;

    /// Lipschitz constant of `∇h`, when known.
    fn lipschitz(&self) -> Option<f64>;

    /// `Some(w)` when `h(y) = (w/2)‖y‖²`.
    fn quadratic_weight(&self) -> Option<f64> {
        None
    }
}

/// `h(y) = (w/2)‖y‖²`. `w = 1` is the usual least-squares loss.
#[derive(Debug, Clone, Copy)]
pub struct SquaredNorm {
    pub weight: f64,
}

impl SquaredNorm {
    pub fn half() -> Self {
        Self { weight: 1.0 }
    }
}

impl OuterLoss for SquaredNorm {
    fn name(&self) -> &'static str {
        "squared_norm"
    }

    fn value(&self, y: &[f64]) -> f64 {
        0.5 * self.weight * linalg::norm_sq(y)
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        linalg::scale(self.weight, y)
    }

    fn infimum(&self) -> f64 {
        0.0
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.weight)
    }

    fn quadratic_weight(&self) -> Option<f64> {
        Some(self.weight)
    }
}

/// Pseudo-Huber loss `Σ δ²(√(1 + (y_i/δ)²) − 1)`; gradient is 1-Lipschitz.
#[derive(Debug, Clone, Copy)]
pub struct PseudoHuber {
    pub delta: f64,
}

impl OuterLoss for PseudoHuber {
    fn name(&self) -> &'static str {
        "pseudo_huber"
    }

    fn value(&self, y: &[f64]) -> f64 {
        let d2 = self.delta * self.delta;
        y.iter()
            .map(|&v| d2 * ((1.0 + v * v / d2).sqrt() - 1.0))
            .sum()
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        let d2 = self.delta * self.delta;
        y.iter().map(|&v| v / (1.0 + v * v / d2).sqrt()).collect()
    }

    fn infimum(&self) -> f64 {
        0.0
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
}
