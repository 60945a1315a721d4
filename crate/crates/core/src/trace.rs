//! Per-iteration run records and their CSV form.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::stationarity::StationarityMeasure;

pub const CSV_HEADER: &str = "k,F,delta,omega,rho,mu,inner_iters,backtracks,oracle_cost,wall_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    /// `ω(x_k) ≤ ε`.
    Stationary,
    /// `Δ_k` fell below the floor: `F(x_k)` is at the global lower bound.
    DeltaFloor,
    MaxIters,
    SubproblemStall,
    BudgetExhausted,
}

/// One row per outer iterate. Row 0 is the initial point; row `k ≥ 1`
/// describes the step that produced `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub delta: f64,
    /// `ω(x_k)`; NaN until it has been computed.
    pub omega: f64,
    pub rho: f64,
    pub mu: f64,
    pub inner_iters: usize,
    pub backtracks: usize,
    pub oracle_cost: u64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub status: Status,
    pub measure: StationarityMeasure,
    /// Iterates, when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl RunTrace {
    pub(crate) fn new(measure: StationarityMeasure, record_iterates: bool) -> Self {
        Self {
            rows: Vec::new(),
            status: Status::MaxIters,
            measure,
            iterates: record_iterates.then(Vec::new),
        }
    }

    pub(crate) fn push(&mut self, row: TraceRow, x: &[f64]) {
        self.rows.push(row);
        if let Some(it) = self.iterates.as_mut() {
            it.push(x.to_vec());
        }
    }

    /// Fills in `ω(x_k)` for the newest row and moves its cost forward to
    /// include the evaluation.
    pub(crate) fn set_last_omega(&mut self, omega: f64, cost: u64) {
        if let Some(r) = self.rows.last_mut() {
            r.omega = omega;
            r.oracle_cost = cost;
        }
    }

    pub fn last(&self) -> &TraceRow {
        self.rows
            .last()
            .expect("trace always holds the initial row")
    }

    pub fn objective_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.f).collect()
    }

    pub fn total_cost(&self) -> u64 {
        self.last().oracle_cost
    }

    /// Total number of damping (or step-size) increases over the run.
    pub fn total_backtracks(&self) -> usize {
        self.rows.iter().map(|r| r.backtracks).sum()
    }

    /// Oracle cost at the first iterate with `F ≤ target`.
    pub fn cost_to_reach(&self, target: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.f <= target)
            .map(|r| r.oracle_cost)
    }

    /// Writes the trace as CSV. With `include_wall = false` the wall-clock
    /// column is written as 0 so output is reproducible byte for byte. When
    /// iterates were recorded they follow as columns `x0, x1, ...`.
    pub fn write_csv<W: Write>(&self, mut out: W, include_wall: bool) -> io::Result<()> {
        let iterates = self.iterates.as_ref().filter(|it| it.len() == self.rows.len());
        let dim = iterates.and_then(|it| it.first()).map_or(0, Vec::len);
        write!(out, "{CSV_HEADER}")?;
        for i in 0..dim {
            write!(out, ",x{i}")?;
        }
        writeln!(out)?;
        for (idx, r) in self.rows.iter().enumerate() {
            let wall = if include_wall { r.wall_s } else { 0.0 };
            write!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.k,
                r.f,
                r.delta,
                r.omega,
                r.rho,
                r.mu,
                r.inner_iters,
                r.backtracks,
                r.oracle_cost,
                wall
            )?;
            if let Some(it) = iterates {
                for v in &it[idx] {
                    write!(out, ",{v}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Fits `log δ_{k+1} ≈ p · log δ_k + c` by least squares over the last
/// `ratios` consecutive pairs of `deltas` that precede (and include) the
/// first value below `floor`. Returns `None` if there are too few positive
/// values.
pub fn fitted_order(deltas: &[f64], floor: f64, ratios: usize) -> Option<f64> {
    let end = deltas
        .iter()
        .position(|&d| d < floor)
        .map_or(deltas.len(), |i| i + 1);
    let window: Vec<f64> = deltas[..end].iter().copied().filter(|&d| d > 0.0).collect();
    if ratios == 0 || window.len() < ratios + 1 {
        return None;
    }
    let tail = &window[window.len() - ratios - 1..];
    let xs: Vec<f64> = tail[..ratios].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = tail[1..].iter().map(|d| d.ln()).collect();
    let n = ratios as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_quadratic_sequence() {
        let d = [1e-1, 1e-2, 1e-4, 1e-8, 1e-16];
        let p = fitted_order(&d, 1e-12, 2).unwrap();
        assert!((p - 2.0).abs() < 1e-12, "{p}");
    }

    #[test]
    fn order_of_linear_sequence() {
        let d: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        let p = fitted_order(&d, 1e-12, 3).unwrap();
        assert!((p - 1.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn too_short_window() {
        assert!(fitted_order(&[1e-1, 1e-20], 1e-12, 2).is_none());
    }

    #[test]
    fn csv_header_and_rows() {
        let mut t = RunTrace::new(StationarityMeasure::Exact, false);
        t.push(
            TraceRow {
                k: 0,
                f: 1.0,
                delta: 1.0,
                omega: 2.0,
                rho: 0.01,
                mu: 0.0,
                inner_iters: 0,
                backtracks: 0,
                oracle_cost: 1,
                wall_s: 0.25,
            },
            &[0.0, 0.0],
        );
        let mut buf = Vec::new();
        t.write_csv(&mut buf, false).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, format!("{CSV_HEADER}\n0,1,1,2,0.01,0,0,0,1,0\n"));
        assert_eq!(t.cost_to_reach(1.0), Some(1));
        assert_eq!(t.cost_to_reach(0.5), None);
    }

    #[test]
    fn csv_with_iterates() {
        let mut t = RunTrace::new(StationarityMeasure::Exact, true);
        let row = TraceRow {
            k: 0,
            f: 0.5,
            delta: 0.5,
            omega: f64::NAN,
            rho: 1.0,
            mu: 0.0,
            inner_iters: 0,
            backtracks: 0,
            oracle_cost: 1,
            wall_s: 0.0,
        };
        t.push(row, &[1.5, -2.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, false).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, format!("{CSV_HEADER},x0,x1\n0,0.5,0.5,NaN,1,0,0,0,1,0,1.5,-2\n"));
    }
}
