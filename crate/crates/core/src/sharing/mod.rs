//! Additive and boolean sharing, plus the gadget provider for imported
//! sub-protocols.

mod gadgets;

pub use gadgets::{
    b2a, invsqrt, lt, lt_const, mux, rexp, trunc, wrap, CostEntry, CostTable, GadgetBackend,
    GadgetKind, GadgetProvider,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::fixedpoint::{Domain, FixedPointConfig};
use crate::Role;

/// One party's share of a vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Share {
    pub domain: Domain,
    pub party: Role,
    pub values: Vec<u64>,
}

impl Share {
    pub fn new(domain: Domain, party: Role, values: Vec<u64>) -> Self {
        Self {
            domain,
            party,
            values,
        }
    }

    /// This party's share of a public zero vector.
    pub fn zeros(domain: Domain, party: Role, len: usize) -> Self {
        Self::new(domain, party, vec![0; len])
    }

    /// This party's share of a public vector: A holds it, B holds zero.
    pub fn public(domain: Domain, party: Role, values: &[u64]) -> Self {
        match party {
            Role::A => Self::new(domain, party, values.to_vec()),
            Role::B => Self::zeros(domain, party, values.len()),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, other: &Share) -> Result<()> {
        if self.domain != other.domain || self.values.len() != other.values.len() {
            return Err(Error::DomainMismatch(format!(
                "{:?}[{}] vs {:?}[{}]",
                self.domain,
                self.values.len(),
                other.domain,
                other.values.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Share, cfg: &FixedPointConfig) -> Result<Share> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| cfg.add(self.domain, a, b)))
    }

    pub fn sub(&self, other: &Share, cfg: &FixedPointConfig) -> Result<Share> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| cfg.sub(self.domain, a, b)))
    }

    fn zip(&self, other: &Share, f: impl Fn(u64, u64) -> u64) -> Share {
        Share::new(
            self.domain,
            self.party,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Adds a public vector; only party A's share changes.
    pub fn add_public(&self, public: &[u64], cfg: &FixedPointConfig) -> Share {
        match self.party {
            Role::A => Share::new(
                self.domain,
                self.party,
                self.values
                    .iter()
                    .zip(public)
                    .map(|(&a, &b)| cfg.add(self.domain, a, b))
                    .collect(),
            ),
            Role::B => self.clone(),
        }
    }

    /// Adds the same public constant to every element.
    pub fn add_scalar(&self, c: u64, cfg: &FixedPointConfig) -> Share {
        self.add_public(&vec![c; self.len()], cfg)
    }

    /// Multiplies each element by a public constant.
    pub fn mul_scalar(&self, c: u64, cfg: &FixedPointConfig) -> Share {
        Share::new(
            self.domain,
            self.party,
            self.values
                .iter()
                .map(|&a| cfg.mul(self.domain, a, c))
                .collect(),
        )
    }

    /// Element-wise product with a public vector.
    pub fn mul_public(&self, public: &[u64], cfg: &FixedPointConfig) -> Share {
        Share::new(
            self.domain,
            self.party,
            self.values
                .iter()
                .zip(public)
                .map(|(&a, &b)| cfg.mul(self.domain, a, b))
                .collect(),
        )
    }

    pub fn neg(&self, cfg: &FixedPointConfig) -> Share {
        Share::new(
            self.domain,
            self.party,
            self.values
                .iter()
                .map(|&a| cfg.neg(self.domain, a))
                .collect(),
        )
    }

    /// XOR of two boolean shares.
    pub fn xor(&self, other: &Share) -> Result<Share> {
        if self.domain != Domain::Bool {
            return Err(Error::DomainMismatch("xor on an arithmetic share".into()));
        }
        self.check(other)?;
        Ok(self.zip(other, |a, b| (a ^ b) & 1))
    }

    /// Complement of a boolean share; party A flips its bits.
    pub fn not(&self) -> Share {
        match self.party {
            Role::A => Share::new(
                self.domain,
                self.party,
                self.values.iter().map(|&a| a ^ 1).collect(),
            ),
            Role::B => self.clone(),
        }
    }

    /// Picks elements by index.
    pub fn gather(&self, idx: impl IntoIterator<Item = usize>) -> Share {
        Share::new(
            self.domain,
            self.party,
            idx.into_iter().map(|i| self.values[i]).collect(),
        )
    }

    /// Concatenates shares of the same domain.
    pub fn concat(parts: &[Share]) -> Result<Share> {
        let first = parts
            .first()
            .ok_or_else(|| Error::DomainMismatch("concatenating no shares".into()))?;
        let mut values = Vec::with_capacity(parts.iter().map(Share::len).sum());
        for p in parts {
            if p.domain != first.domain {
                return Err(Error::DomainMismatch("mixed domains in concat".into()));
            }
            values.extend_from_slice(&p.values);
        }
        Ok(Share::new(first.domain, first.party, values))
    }
}

/// Splits `secret` into two uniformly random shares.
pub fn share<R: Rng + ?Sized>(
    secret: &[u64],
    domain: Domain,
    cfg: &FixedPointConfig,
    rng: &mut R,
) -> Result<(Share, Share)> {
    let m = cfg.modulus(domain);
    if let Some(&bad) = secret.iter().find(|&&v| v as u128 >= m) {
        return Err(Error::DomainMismatch(format!(
            "{bad} is not an element of {domain:?}"
        )));
    }
    let a: Vec<u64> = secret
        .iter()
        .map(|_| random_element(domain, cfg, rng))
        .collect();
    let b: Vec<u64> = secret
        .iter()
        .zip(&a)
        .map(|(&x, &r)| cfg.sub(domain, x, r))
        .collect();
    Ok((
        Share::new(domain, Role::A, a),
        Share::new(domain, Role::B, b),
    ))
}

/// Recombines two shares of the same vector.
pub fn reconstruct(a: &Share, b: &Share, cfg: &FixedPointConfig) -> Result<Vec<u64>> {
    a.check(b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| cfg.add(a.domain, x, y))
        .collect())
}

/// A uniformly random element of `domain`.
pub fn random_element<R: Rng + ?Sized>(domain: Domain, cfg: &FixedPointConfig, rng: &mut R) -> u64 {
    match domain {
        Domain::Ring => rng.next_u64() & cfg.ring_mask(),
        Domain::Field => rng.gen_range(0..cfg.p),
        Domain::Bool => rng.next_u64() & 1,
    }
}

/// A vector of uniformly random elements.
pub fn random_vector<R: Rng + ?Sized>(
    domain: Domain,
    len: usize,
    cfg: &FixedPointConfig,
    rng: &mut R,
) -> Vec<u64> {
    (0..len).map(|_| random_element(domain, cfg, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_secret_roundtrip() {
        let cfg = FixedPointConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for d in [Domain::Ring, Domain::Field, Domain::Bool] {
            let (a, b) = share(&[0; 16], d, &cfg, &mut rng).unwrap();
            assert_eq!(reconstruct(&a, &b, &cfg).unwrap(), vec![0; 16]);
        }
    }

    #[test]
    fn random_roundtrip_many_trials() {
        let cfg = FixedPointConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for t in 0..10_000 {
            let d = [Domain::Ring, Domain::Field, Domain::Bool][t % 3];
            let secret = random_vector(d, 4, &cfg, &mut rng);
            let (a, b) = share(&secret, d, &cfg, &mut rng).unwrap();
            assert_eq!(reconstruct(&a, &b, &cfg).unwrap(), secret);
        }
    }

    #[test]
    fn rejects_out_of_domain_secret() {
        let cfg = FixedPointConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        assert!(matches!(
            share(&[cfg.p], Domain::Field, &cfg, &mut rng),
            Err(Error::DomainMismatch(_))
        ));
        assert!(matches!(
            share(&[2], Domain::Bool, &cfg, &mut rng),
            Err(Error::DomainMismatch(_))
        ));
    }

    /// Chi-square statistic of party A's share over `Z_{2^8}` against the uniform law.
    #[test]
    fn marginal_share_is_uniform() {
        let cfg = FixedPointConfig::new(8, 2, 251).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let trials = 256 * 200;
        let mut counts = [0u64; 256];
        for _ in 0..trials {
            let (a, _) = share(&[17], Domain::Ring, &cfg, &mut rng).unwrap();
            counts[a.values[0] as usize] += 1;
        }
        let expect = trials as f64 / 256.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 99th percentile of chi-square with 255 degrees of freedom.
        assert!(chi2 < 310.457, "chi2 = {chi2}");
    }

    #[test]
    fn xor_composition_exhaustive() {
        let cfg = FixedPointConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for x in 0..2u64 {
            for y in 0..2u64 {
                let (xa, xb) = share(&[x], Domain::Bool, &cfg, &mut rng).unwrap();
                let (ya, yb) = share(&[y], Domain::Bool, &cfg, &mut rng).unwrap();
                let za = xa.xor(&ya).unwrap();
                let zb = xb.xor(&yb).unwrap();
                assert_eq!(reconstruct(&za, &zb, &cfg).unwrap(), vec![x ^ y]);
                assert_eq!(
                    reconstruct(&xa.not(), &xb.not(), &cfg).unwrap(),
                    vec![x ^ 1]
                );
            }
        }
    }

    #[test]
    fn public_constants_touch_one_share() {
        let cfg = FixedPointConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (a, b) = share(&[5, 6], Domain::Field, &cfg, &mut rng).unwrap();
        let a2 = a.add_scalar(10, &cfg).mul_scalar(3, &cfg);
        let b2 = b.add_scalar(10, &cfg).mul_scalar(3, &cfg);
        assert_eq!(reconstruct(&a2, &b2, &cfg).unwrap(), vec![45, 48]);
    }
}
