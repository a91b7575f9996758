//! Fixed-point encoding into `Z_{2^k}` and `Z_p`, plus share conversion
//! between the two domains.
//!
//! Negative reals use the upper half of either modulus.

mod convert;

pub use convert::{
    convert_share, field_to_ring, ring_to_field, ring_to_field_local, truncate_local,
    truncate_shares,
};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest prime above `2^28` that is `1 mod 16384`.
pub const DEFAULT_P: u64 = 268_582_913;
pub const DEFAULT_K: u32 = 37;
pub const DEFAULT_S: u32 = 12;

/// Algebraic home of a value or share.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    /// `Z_{2^k}`.
    Ring,
    /// `Z_p`.
    Field,
    /// `Z_2` with XOR sharing.
    Bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationMode {
    /// Each party shifts its own share; off by at most one, fails with probability `|x|/2^k`.
    Local,
    /// Exact floor through the gadget provider.
    Faithful,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConversionMode {
    /// Each party lifts its own ring share; wraps with probability `|x|/2^k`.
    Fast,
    /// Removes the ring wrap with a comparison and a multiplexer.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub k: u32,
    pub s: u32,
    pub p: u64,
    #[serde(default = "default_truncation")]
    pub truncation_mode: TruncationMode,
    #[serde(default = "default_conversion")]
    pub ring_to_field: ConversionMode,
}

fn default_truncation() -> TruncationMode {
    TruncationMode::Faithful
}

fn default_conversion() -> ConversionMode {
    ConversionMode::Fast
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            s: DEFAULT_S,
            p: DEFAULT_P,
            truncation_mode: default_truncation(),
            ring_to_field: default_conversion(),
        }
    }
}

impl FixedPointConfig {
    pub fn new(k: u32, s: u32, p: u64) -> Result<Self> {
        let cfg = Self {
            k,
            s,
            p,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_truncation(mut self, mode: TruncationMode) -> Self {
        self.truncation_mode = mode;
        self
    }

    pub fn with_conversion(mut self, mode: ConversionMode) -> Self {
        self.ring_to_field = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k > 62 {
            return Err(Error::Config(format!(
                "ring width k = {} outside [2, 62]",
                self.k
            )));
        }
        if self.s + 2 >= self.k {
            return Err(Error::Config(format!(
                "s = {} leaves no headroom in k = {}",
                self.s, self.k
            )));
        }
        if !ptinfer_he::modarith::is_prime(self.p) {
            return Err(Error::Config(format!("p = {} is not prime", self.p)));
        }
        if (1u64 << self.s) >= self.p || self.p >= (1u64 << self.k) {
            return Err(Error::Config(format!(
                "need 2^s < p < 2^k, got s = {}, p = {}, k = {}",
                self.s, self.p, self.k
            )));
        }
        Ok(())
    }

    pub fn ring_mask(&self) -> u64 {
        (1u64 << self.k) - 1
    }

    /// Modulus of `domain` as a 128-bit integer.
    pub fn modulus(&self, domain: Domain) -> u128 {
        match domain {
            Domain::Ring => 1u128 << self.k,
            Domain::Field => self.p as u128,
            Domain::Bool => 2,
        }
    }

    /// Reduces a signed integer into `domain`.
    pub fn reduce(&self, domain: Domain, v: i128) -> u64 {
        let m = self.modulus(domain) as i128;
        v.rem_euclid(m) as u64
    }

    /// Signed reading of `v`: upper half of the modulus is negative.
    pub fn lift(&self, domain: Domain, v: u64) -> i128 {
        let m = self.modulus(domain);
        let v = v as u128 % m;
        if v >= m.div_ceil(2) {
            v as i128 - m as i128
        } else {
            v as i128
        }
    }

    #[inline]
    pub fn add(&self, domain: Domain, a: u64, b: u64) -> u64 {
        match domain {
            Domain::Ring => a.wrapping_add(b) & self.ring_mask(),
            Domain::Field => {
                let s = a + b;
                if s >= self.p {
                    s - self.p
                } else {
                    s
                }
            }
            Domain::Bool => (a ^ b) & 1,
        }
    }

    #[inline]
    pub fn sub(&self, domain: Domain, a: u64, b: u64) -> u64 {
        match domain {
            Domain::Ring => a.wrapping_sub(b) & self.ring_mask(),
            Domain::Field => {
                if a >= b {
                    a - b
                } else {
                    a + self.p - b
                }
            }
            Domain::Bool => (a ^ b) & 1,
        }
    }

    #[inline]
    pub fn mul(&self, domain: Domain, a: u64, b: u64) -> u64 {
        match domain {
            Domain::Ring => a.wrapping_mul(b) & self.ring_mask(),
            Domain::Field => ((a as u128 * b as u128) % self.p as u128) as u64,
            Domain::Bool => a & b & 1,
        }
    }

    #[inline]
    pub fn neg(&self, domain: Domain, a: u64) -> u64 {
        self.sub(domain, 0, a)
    }

    /// Largest magnitude of a scaled integer representable in `domain`.
    pub fn max_magnitude(&self, domain: Domain) -> u128 {
        (self.modulus(domain) - 1) / 2
    }
}

/// A single fixed-point value with its domain and scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixEncoded {
    pub value: u64,
    pub domain: Domain,
    pub scale: u32,
}

/// Encodes `x` at scale `s` as `round(x·2^s)` in `domain`.
pub fn encode<F: Float>(x: F, cfg: &FixedPointConfig, domain: Domain) -> Result<FixEncoded> {
    encode_at(x, cfg.s, cfg, domain)
}

/// Encodes `x` at an explicit scale.
pub fn encode_at<F: Float>(
    x: F,
    scale: u32,
    cfg: &FixedPointConfig,
    domain: Domain,
) -> Result<FixEncoded> {
    let xf = x.to_f64().unwrap_or(f64::NAN);
    let scaled = (xf * (scale as f64).exp2()).round();
    if !scaled.is_finite() || scaled.abs() > cfg.max_magnitude(domain) as f64 {
        return Err(Error::Overflow { value: xf });
    }
    Ok(FixEncoded {
        value: cfg.reduce(domain, scaled as i128),
        domain,
        scale,
    })
}

/// Inverse of [`encode_at`]; values above the midpoint read as negative.
pub fn decode<F: Float>(v: &FixEncoded, cfg: &FixedPointConfig) -> F {
    let signed = cfg.lift(v.domain, v.value) as f64;
    F::from(signed / (v.scale as f64).exp2()).unwrap_or_else(F::nan)
}

/// Encodes a slice at `scale`.
pub fn encode_slice<F: Float>(
    xs: &[F],
    scale: u32,
    cfg: &FixedPointConfig,
    domain: Domain,
) -> Result<Vec<u64>> {
    xs.iter()
        .map(|&x| encode_at(x, scale, cfg, domain).map(|e| e.value))
        .collect()
}

/// Decodes a slice of raw elements at `scale`.
pub fn decode_slice<F: Float>(
    vs: &[u64],
    scale: u32,
    cfg: &FixedPointConfig,
    domain: Domain,
) -> Vec<F> {
    vs.iter()
        .map(|&value| {
            decode(
                &FixEncoded {
                    value,
                    domain,
                    scale,
                },
                cfg,
            )
        })
        .collect()
}
