//! Slot-vector twin of the RLWE engine with a modelled noise budget.

use crate::modarith::{add_mod, mul_mod, sub_mod};

/// Budget of a fresh encryption, in bits.
pub const FRESH_BUDGET: f64 = 120.0;
/// Budget consumed by a plaintext multiplication.
pub const MUL_PLAIN_COST: f64 = 36.0;
/// Budget consumed by a ciphertext multiplication or square.
pub const MUL_CT_COST: f64 = 42.0;

/// Budget of a sum: noise magnitudes add, so equal budgets lose one bit.
pub fn sum_budget(a: f64, b: f64) -> f64 {
    -((-a).exp2() + (-b).exp2()).log2()
}

#[derive(Clone, Debug)]
pub(crate) struct ClearEngine {
    pub p: u64,
}

impl ClearEngine {
    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| add_mod(x, y, self.p))
            .collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| sub_mod(x, y, self.p))
            .collect()
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| mul_mod(x, y, self.p))
            .collect()
    }
}
