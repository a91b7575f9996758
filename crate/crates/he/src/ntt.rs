//! Negacyclic number theoretic transform over `Z_m[X]/(X^N + 1)`.
//!
//! Forward output is in bit-reversed evaluation order; the inverse accepts
//! that order, so pointwise products never need a permutation.

use crate::modarith::{
    add_mod, inv_mod, mul_mod, mul_shoup, pow_mod, primitive_root_of_unity, shoup, sub_mod,
};

#[derive(Clone, Debug)]
pub struct NttTable {
    n: usize,
    modulus: u64,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl NttTable {
    /// Builds tables for degree `n`; `None` unless `modulus ≡ 1 (mod 2n)` and prime.
    pub fn new(n: usize, modulus: u64) -> Option<Self> {
        if !n.is_power_of_two() || modulus >= 1 << 62 {
            return None;
        }
        let psi = primitive_root_of_unity(2 * n as u64, modulus)?;
        let psi_inv = inv_mod(psi, modulus);
        let bits = n.trailing_zeros();
        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let mut pw = 1u64;
        let mut pw_inv = 1u64;
        for i in 0..n {
            let r = bit_reverse(i, bits);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = mul_mod(pw, psi, modulus);
            pw_inv = mul_mod(pw_inv, psi_inv, modulus);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| shoup(w, modulus)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| shoup(w, modulus)).collect();
        let n_inv = inv_mod(n as u64 % modulus, modulus);
        Some(Self {
            n,
            modulus,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: shoup(n_inv, modulus),
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m_mod = self.modulus;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_shoup(a[j + t], w, ws, m_mod);
                    a[j] = add_mod(u, v, m_mod);
                    a[j + t] = sub_mod(u, v, m_mod);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m_mod = self.modulus;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.psi_inv_rev[h + i];
                let ws = self.psi_inv_rev_shoup[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, m_mod);
                    a[j + t] = mul_shoup(sub_mod(u, v, m_mod), w, ws, m_mod);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_shoup(*x, self.n_inv, self.n_inv_shoup, m_mod);
        }
    }

    /// Evaluates a coefficient vector at `psi^(2*bitrev(i)+1)`, the slot order of [`Self::forward`].
    pub fn evaluation_point(&self, slot: usize) -> u64 {
        let bits = self.n.trailing_zeros();
        let psi = self.psi_rev[bit_reverse(1, bits)];
        pow_mod(psi, 2 * bit_reverse(slot, bits) as u64 + 1, self.modulus)
    }
}
