//! Convex, possibly nonsmooth, regularizers `g` and their proximal maps.
//!
//! The proximal map is parameterized by an explicit quadratic weight `s`:
//! `prox(x, s) = argmin_z { g(z) + (s/2)‖z − x‖² }`.

use std::fmt::Debug;

use crate::linalg;

pub trait Regularizer: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// `g(x)`, `+∞` outside the domain.
    fn value(&self, x: &[f64]) -> f64;

    fn prox(&self, x: &[f64], weight: f64) -> Vec<f64>;

    /// `inf g`.
    fn infimum(&self) -> f64;

    /// `dist(v, ∂g(x))` in closed form. `None` if `g` is not one of the
    /// separable shapes with a known subdifferential.
    fn subdiff_distance(&self, x: &[f64], v: &[f64]) -> Option<f64>;

    fn is_zero(&self) -> bool {
        false
    }

    fn is_separable(&self) -> bool {
        true
    }
}

/// Sums `φ(x_i, v_i)²` over coordinates, where `φ` is the one-dimensional
/// distance from `v_i` to the subdifferential at `x_i`.
fn separable_distance(x: &[f64], v: &[f64], per_coord: impl Fn(f64, f64) -> f64) -> f64 {
    debug_assert_eq!(x.len(), v.len());
    x.iter()
        .zip(v)
        .map(|(&xi, &vi)| {
            let d = per_coord(xi, vi);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Regularizer for Zero {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn prox(&self, x: &[f64], _weight: f64) -> Vec<f64> {
        x.to_vec()
    }

    fn infimum(&self) -> f64 {
        0.0
    }

    fn subdiff_distance(&self, _x: &[f64], v: &[f64]) -> Option<f64> {
        Some(linalg::norm(v))
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Indicator of the nonnegative orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonNegative;

impl Regularizer for NonNegative {
    fn name(&self) -> &'static str {
        "nonnegative"
    }

    fn value(&self, x: &[f64]) -> f64 {
        if x.iter().all(|&v| v >= 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, x: &[f64], _weight: f64) -> Vec<f64> {
        x.iter().map(|&v| v.max(0.0)).collect()
    }

    fn infimum(&self) -> f64 {
        0.0
    }

    fn subdiff_distance(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        Some(separable_distance(x, v, |xi, vi| {
            if xi > 0.0 {
                vi.abs()
            } else if xi == 0.0 {
                // normal cone (−∞, 0]
                vi.max(0.0)
            } else {
                f64::INFINITY
            }
        }))
    }
}

/// Indicator of the box `[lower, upper]^d`.
#[derive(Debug, Clone, Copy)]
pub struct BoxIndicator {
    pub lower: f64,
    pub upper: f64,
}

impl BoxIndicator {
    pub fn new(lower: f64, upper: f64) -> Self {
        assert!(lower <= upper, "empty box [{lower}, {upper}]");
        Self { lower, upper }
    }
}

impl Regularizer for BoxIndicator {
    fn name(&self) -> &'static str {
        "box"
    }

    fn value(&self, x: &[f64]) -> f64 {
        if x.iter().all(|&v| v >= self.lower && v <= self.upper) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, x: &[f64], _weight: f64) -> Vec<f64> {
        x.iter().map(|&v| v.clamp(self.lower, self.upper)).collect()
    }

    fn infimum(&self) -> f64 {
        0.0
    }

    fn subdiff_distance(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        let (lo, hi) = (self.lower, self.upper);
        Some(separable_distance(x, v, |xi, vi| {
            if xi < lo || xi > hi {
                f64::INFINITY
            } else if lo == hi {
                0.0
            } else if xi == lo {
                vi.max(0.0)
            } else if xi == hi {
                (-vi).max(0.0)
            } else {
                vi.abs()
            }
        }))
    }
}

/// `λ‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub lambda: f64,
}

impl Regularizer for L1Norm {
    fn name(&self) -> &'static str {
        "l1"
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox(&self, x: &[f64], weight: f64) -> Vec<f64> {
        let t = self.lambda / weight;
        x.iter()
            .map(|&v| v.signum() * (v.abs() - t).max(0.0))
            .collect()
    }

    fn infimum(&self) -> f64 {
        0.0
    }

    fn subdiff_distance(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        let lambda = self.lambda;
        Some(separable_distance(x, v, |xi, vi| {
            if xi == 0.0 {
                (vi.abs() - lambda).max(0.0)
            } else {
                (vi - lambda * xi.signum()).abs()
            }
        }))
    }
}

/// Indicator of the Euclidean ball of the given radius. Not separable, so
/// stationarity falls back to the prox-gradient residual.
#[derive(Debug, Clone, Copy)]
pub struct BallIndicator {
    pub radius: f64,
}

impl Regularizer for BallIndicator {
    fn name(&self) -> &'static str {
        "ball"
    }

    fn value(&self, x: &[f64]) -> f64 {
        if linalg::norm(x) <= self.radius {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, x: &[f64], _weight: f64) -> Vec<f64> {
        let n = linalg::norm(x);
        if n <= self.radius {
            x.to_vec()
        } else {
            linalg::scale(self.radius / n, x)
        }
    }

    fn infimum(&self) -> f64 {
        0.0
    }

    fn subdiff_distance(&self, _x: &[f64], _v: &[f64]) -> Option<f64> {
        None
    }

    fn is_separable(&self) -> bool {
        false
    }
}
