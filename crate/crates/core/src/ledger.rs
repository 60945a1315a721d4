//! Oracle call accounting.
//!
//! Every access to the problem goes through a ledger so that solvers can be
//! compared on a common weighted cost. Weights: residual evaluation 1,
//! linearization 2, deriving the transpose 0, each Jacobian-vector or
//! vector-Jacobian product 1, and everything touching `g` or `h` 0.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Oracle {
    ResidualEval,
    Linearize,
    TransposeDerive,
    JvpApply,
    VjpApply,
    LossEval,
    LossGrad,
    ProxApply,
}

impl Oracle {
    pub const ALL: [Oracle; 8] = [
        Oracle::ResidualEval,
        Oracle::Linearize,
        Oracle::TransposeDerive,
        Oracle::JvpApply,
        Oracle::VjpApply,
        Oracle::LossEval,
        Oracle::LossGrad,
        Oracle::ProxApply,
    ];

    pub const fn weight(self) -> u64 {
        match self {
            Oracle::ResidualEval => 1,
            Oracle::Linearize => 2,
            Oracle::TransposeDerive => 0,
            Oracle::JvpApply => 1,
            Oracle::VjpApply => 1,
            Oracle::LossEval | Oracle::LossGrad | Oracle::ProxApply => 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLedger {
    pub residual_eval: u64,
    pub linearize: u64,
    pub transpose_derive: u64,
    pub jvp_apply: u64,
    pub vjp_apply: u64,
    pub loss_eval: u64,
    pub loss_grad: u64,
    pub prox_apply: u64,
    weighted_cost: u64,
}

impl OracleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, oracle: Oracle) {
        self.charge_n(oracle, 1);
    }

    pub fn charge_n(&mut self, oracle: Oracle, n: u64) {
        *self.count_mut(oracle) += n;
        self.weighted_cost += oracle.weight() * n;
    }

    pub fn count(&self, oracle: Oracle) -> u64 {
        match oracle {
            Oracle::ResidualEval => self.residual_eval,
            Oracle::Linearize => self.linearize,
            Oracle::TransposeDerive => self.transpose_derive,
            Oracle::JvpApply => self.jvp_apply,
            Oracle::VjpApply => self.vjp_apply,
            Oracle::LossEval => self.loss_eval,
            Oracle::LossGrad => self.loss_grad,
            Oracle::ProxApply => self.prox_apply,
        }
    }

    fn count_mut(&mut self, oracle: Oracle) -> &mut u64 {
        match oracle {
            Oracle::ResidualEval => &mut self.residual_eval,
            Oracle::Linearize => &mut self.linearize,
            Oracle::TransposeDerive => &mut self.transpose_derive,
            Oracle::JvpApply => &mut self.jvp_apply,
            Oracle::VjpApply => &mut self.vjp_apply,
            Oracle::LossEval => &mut self.loss_eval,
            Oracle::LossGrad => &mut self.loss_grad,
            Oracle::ProxApply => &mut self.prox_apply,
        }
    }

    /// Incrementally maintained weighted cost.
    pub fn cost(&self) -> u64 {
        self.weighted_cost
    }

    /// Weighted cost recomputed from the raw counts.
    pub fn recompute_cost(&self) -> u64 {
        Oracle::ALL
            .iter()
            .map(|&o| o.weight() * self.count(o))
            .sum()
    }

    /// Builds a ledger from raw counts, in [`Oracle::ALL`] order.
    pub fn from_counts(counts: [u64; 8]) -> Self {
        let mut ledger = Self::new();
        for (o, n) in Oracle::ALL.iter().zip(counts) {
            ledger.charge_n(*o, n);
        }
        ledger
    }
}

/// Weighted oracle cost of a ledger.
pub fn ledger_cost(ledger: &OracleLedger) -> u64 {
    ledger.cost()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weighted_example() {
        // residual 4, linearize 1, jvp 3, vjp 2
        let ledger = OracleLedger::from_counts([4, 1, 0, 3, 2, 0, 0, 0]);
        assert_eq!(ledger_cost(&ledger), 11);
    }

    #[test]
    fn empty_ledger_is_free() {
        assert_eq!(ledger_cost(&OracleLedger::new()), 0);
    }

    #[test]
    fn g_and_h_oracles_are_free() {
        let mut ledger = OracleLedger::new();
        ledger.charge_n(Oracle::LossEval, 100);
        ledger.charge_n(Oracle::ProxApply, 50);
        assert_eq!(ledger_cost(&ledger), 0);
    }

    proptest! {
        #[test]
        fn incremental_cost_matches_recount(ops in proptest::collection::vec((0usize..8, 1u64..5), 0..64)) {
            let mut ledger = OracleLedger::new();
            let mut prev = ledger.clone();
            for (i, n) in ops {
                ledger.charge_n(Oracle::ALL[i], n);
                for o in Oracle::ALL {
                    prop_assert!(ledger.count(o) >= prev.count(o));
                }
                prev = ledger.clone();
            }
            prop_assert_eq!(ledger.cost(), ledger.recompute_cost());
        }
    }
}
