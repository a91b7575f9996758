//! Parameter sets and their fingerprint.

use sha2::{Digest, Sha256};

use crate::modarith::{is_prime, ntt_primes_below};
use crate::HeError;

/// Default ring degree.
pub const DEFAULT_DEGREE: usize = 8192;
/// Bit size of each ciphertext RNS prime.
pub const Q_PRIME_BITS: u32 = 60;
/// Number of ciphertext RNS primes.
pub const Q_PRIME_COUNT: usize = 3;
/// Auxiliary primes used while tensoring two ciphertexts.
pub const AUX_PRIME_COUNT: usize = 4;
/// Radix bits of the relinearization digit decomposition.
pub const RELIN_DIGIT_BITS: u32 = 30;

/// Which implementation backs a context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Real RLWE arithmetic.
    Rlwe,
    /// Unencrypted slot vectors with a modelled noise budget.
    Clear,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Rlwe => "rlwe",
            Backend::Clear => "clear",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeParams {
    /// Ring degree and slot count.
    pub n: usize,
    /// Plaintext modulus.
    pub p: u64,
    /// Ciphertext RNS primes.
    pub q: Vec<u64>,
    /// Extra primes for the tensor-product basis.
    pub aux: Vec<u64>,
    pub backend: Backend,
}

impl HeParams {
    /// Builds the standard chain for degree `n` and plaintext modulus `p`.
    pub fn new(n: usize, p: u64, backend: Backend) -> Result<Self, HeError> {
        if !n.is_power_of_two() {
            return Err(HeError::Param(format!("degree {n} is not a power of two")));
        }
        if !is_prime(p) {
            return Err(HeError::Param(format!(
                "plaintext modulus {p} is not prime"
            )));
        }
        if !(p - 1).is_multiple_of(2 * n as u64) {
            return Err(HeError::Param(format!(
                "plaintext modulus {p} is not 1 mod {}",
                2 * n
            )));
        }
        let all = ntt_primes_below(
            Q_PRIME_BITS,
            2 * n as u64,
            Q_PRIME_COUNT + AUX_PRIME_COUNT,
            &[],
        );
        Ok(Self {
            n,
            p,
            q: all[..Q_PRIME_COUNT].to_vec(),
            aux: all[Q_PRIME_COUNT..].to_vec(),
            backend,
        })
    }

    /// Degree 8192 with the given plaintext modulus.
    pub fn standard(p: u64, backend: Backend) -> Result<Self, HeError> {
        Self::new(DEFAULT_DEGREE, p, backend)
    }

    pub fn q_bits(&self) -> f64 {
        self.q.iter().map(|&q| (q as f64).log2()).sum()
    }

    /// Number of relinearization digits per RNS limb.
    pub fn digits_per_limb(&self) -> usize {
        self.q
            .iter()
            .map(|&q| (64 - q.leading_zeros()).div_ceil(RELIN_DIGIT_BITS) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Bytes of a serialized two-component ciphertext, identical for both backends.
    pub fn ciphertext_bytes(&self) -> usize {
        crate::wire::HEADER_LEN + 2 * self.q.len() * self.n * 8
    }

    /// Truncated SHA-256 over a canonical rendering of the arithmetic parameters.
    pub fn fingerprint(&self) -> u32 {
        let mut h = Sha256::new();
        h.update(
            format!(
                "backend={};n={};p={};q={:?};aux={:?}",
                self.backend.name(),
                self.n,
                self.p,
                self.q,
                self.aux
            )
            .as_bytes(),
        );
        let d = h.finalize();
        u32::from_le_bytes([d[0], d[1], d[2], d[3]])
    }
}
