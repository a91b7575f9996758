//! RNS BFV arithmetic: key generation, encryption, homomorphic operations.
//!
//! Polynomials are stored as `[limb][coefficient]` and kept in NTT form
//! between operations.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngCore};

use crate::modarith::{add_mod, inv_mod, mul_mod, neg_mod, sub_mod};
use crate::ntt::NttTable;
use crate::params::{HeParams, RELIN_DIGIT_BITS};
use crate::HeError;

pub(crate) type Poly = Vec<Vec<u64>>;

/// Centered binomial parameter for error sampling.
pub const CBD_ETA: u32 = 21;

struct Crt {
    moduli: Vec<u64>,
    product: BigUint,
    half: BigUint,
    hat: Vec<BigUint>,
    hat_inv: Vec<u64>,
}

impl Crt {
    fn new(moduli: &[u64]) -> Self {
        let product = moduli.iter().fold(BigUint::from(1u32), |acc, &m| acc * m);
        let hat: Vec<BigUint> = moduli.iter().map(|&m| &product / m).collect();
        let hat_inv = moduli
            .iter()
            .zip(&hat)
            .map(|(&m, h)| inv_mod((h % m).to_u64().unwrap_or(0), m))
            .collect();
        Self {
            moduli: moduli.to_vec(),
            half: &product >> 1u32,
            product,
            hat,
            hat_inv,
        }
    }

    /// The unique value in `[0, product)` with the given residues.
    fn reconstruct(&self, residues: &[u64]) -> BigUint {
        let mut acc = BigUint::zero();
        for (i, &r) in residues.iter().enumerate() {
            let y = mul_mod(r, self.hat_inv[i], self.moduli[i]);
            acc += &self.hat[i] * y;
        }
        while acc >= self.product {
            acc -= &self.product;
        }
        acc
    }
}

pub(crate) struct RlweEngine {
    n: usize,
    p: u64,
    q: Vec<u64>,
    ntt_q: Vec<NttTable>,
    ntt_p: NttTable,
    ntt_ext: Vec<NttTable>,
    q_crt: Crt,
    ext_crt: Crt,
    delta_mod_q: Vec<u64>,
    digits: usize,
}

pub(crate) struct RlweSecret {
    pub s: Poly,
}

pub(crate) struct RlwePublic {
    pub b: Poly,
    pub a: Poly,
}

pub(crate) struct RlweRelin {
    pub keys: Vec<(Poly, Poly)>,
}

fn cbd_sample<R: RngCore + ?Sized>(rng: &mut R) -> i64 {
    let mask = (1u64 << CBD_ETA) - 1;
    let x = rng.next_u64();
    (x & mask).count_ones() as i64 - ((x >> CBD_ETA) & mask).count_ones() as i64
}

fn ternary_sample<R: RngCore + ?Sized>(rng: &mut R) -> i64 {
    rng.gen_range(-1i64..=1)
}

impl RlweEngine {
    pub fn new(params: &HeParams) -> Result<Self, HeError> {
        let n = params.n;
        let bad = |m: u64| HeError::Param(format!("modulus {m} has no 2N-th root of unity"));
        let ntt_q = params
            .q
            .iter()
            .map(|&m| NttTable::new(n, m).ok_or_else(|| bad(m)))
            .collect::<Result<Vec<_>, _>>()?;
        let ext: Vec<u64> = params.q.iter().chain(&params.aux).copied().collect();
        let ntt_ext = ext
            .iter()
            .map(|&m| NttTable::new(n, m).ok_or_else(|| bad(m)))
            .collect::<Result<Vec<_>, _>>()?;
        let ntt_p = NttTable::new(n, params.p).ok_or_else(|| bad(params.p))?;
        let q_crt = Crt::new(&params.q);
        let ext_crt = Crt::new(&ext);
        let bound = BigUint::from(2 * n as u64) * &q_crt.product * &q_crt.product;
        if ext_crt.product <= bound {
            return Err(HeError::Param(
                "auxiliary basis too small for tensoring".into(),
            ));
        }
        let delta = &q_crt.product / params.p;
        let delta_mod_q = params
            .q
            .iter()
            .map(|&m| (&delta % m).to_u64().unwrap_or(0))
            .collect();
        Ok(Self {
            n,
            p: params.p,
            q: params.q.clone(),
            ntt_q,
            ntt_p,
            ntt_ext,
            q_crt,
            ext_crt,
            delta_mod_q,
            digits: params.digits_per_limb(),
        })
    }

    fn small_poly(&self, coeffs: &[i64]) -> Poly {
        let mut out = Vec::with_capacity(self.q.len());
        for (l, &m) in self.q.iter().enumerate() {
            let mut limb: Vec<u64> = coeffs
                .iter()
                .map(|&c| {
                    if c >= 0 {
                        c as u64 % m
                    } else {
                        neg_mod((-c) as u64 % m, m)
                    }
                })
                .collect();
            self.ntt_q[l].forward(&mut limb);
            out.push(limb);
        }
        out
    }

    fn uniform_poly<R: RngCore + ?Sized>(&self, rng: &mut R) -> Poly {
        self.q
            .iter()
            .map(|&m| (0..self.n).map(|_| rng.gen_range(0..m)).collect())
            .collect()
    }

    fn sample_ternary<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        (0..self.n).map(|_| ternary_sample(rng)).collect()
    }

    fn sample_error<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        (0..self.n).map(|_| cbd_sample(rng)).collect()
    }

    fn mul_poly(&self, a: &Poly, b: &Poly) -> Poly {
        a.iter()
            .zip(b)
            .zip(&self.q)
            .map(|((x, y), &m)| x.iter().zip(y).map(|(&u, &v)| mul_mod(u, v, m)).collect())
            .collect()
    }

    fn add_assign(&self, a: &mut Poly, b: &Poly) {
        for ((x, y), &m) in a.iter_mut().zip(b).zip(&self.q) {
            for (u, &v) in x.iter_mut().zip(y) {
                *u = add_mod(*u, v, m);
            }
        }
    }

    fn sub_assign(&self, a: &mut Poly, b: &Poly) {
        for ((x, y), &m) in a.iter_mut().zip(b).zip(&self.q) {
            for (u, &v) in x.iter_mut().zip(y) {
                *u = sub_mod(*u, v, m);
            }
        }
    }

    fn mul_add_assign(&self, acc: &mut Poly, a: &Poly, b: &Poly) {
        for (l, &m) in self.q.iter().enumerate() {
            for ((u, &x), &y) in acc[l].iter_mut().zip(&a[l]).zip(&b[l]) {
                *u = add_mod(*u, mul_mod(x, y, m), m);
            }
        }
    }

    fn negate(&self, a: &Poly) -> Poly {
        a.iter()
            .zip(&self.q)
            .map(|(x, &m)| x.iter().map(|&u| neg_mod(u, m)).collect())
            .collect()
    }

    pub fn keygen<R: RngCore + ?Sized>(
        &self,
        rng: &mut R,
        with_relin: bool,
    ) -> (RlweSecret, RlwePublic, Option<RlweRelin>) {
        let s = self.small_poly(&self.sample_ternary(rng));
        let a = self.uniform_poly(rng);
        let e = self.small_poly(&self.sample_error(rng));
        let mut b = self.negate(&self.mul_poly(&a, &s));
        self.sub_assign(&mut b, &e);
        let relin = with_relin.then(|| {
            let s2 = self.mul_poly(&s, &s);
            let mut keys = Vec::with_capacity(self.q.len() * self.digits);
            for i in 0..self.q.len() {
                for j in 0..self.digits {
                    let a_ij = self.uniform_poly(rng);
                    let e_ij = self.small_poly(&self.sample_error(rng));
                    let mut b_ij = self.negate(&self.mul_poly(&a_ij, &s));
                    self.sub_assign(&mut b_ij, &e_ij);
                    let m = self.q[i];
                    let g = crate::modarith::pow_mod(2, (RELIN_DIGIT_BITS as usize * j) as u64, m);
                    for (u, &v) in b_ij[i].iter_mut().zip(&s2[i]) {
                        *u = add_mod(*u, mul_mod(g, v, m), m);
                    }
                    keys.push((b_ij, a_ij));
                }
            }
            RlweRelin { keys }
        });
        (RlweSecret { s }, RlwePublic { b, a }, relin)
    }

    fn plain_coeffs(&self, slots: &[u64]) -> Vec<u64> {
        let mut m = slots.to_vec();
        self.ntt_p.inverse(&mut m);
        m
    }

    /// `Δ·m` in NTT form.
    fn scaled_message(&self, slots: &[u64]) -> Poly {
        let m = self.plain_coeffs(slots);
        let mut out = Vec::with_capacity(self.q.len());
        for (l, &q) in self.q.iter().enumerate() {
            let d = self.delta_mod_q[l];
            let mut limb: Vec<u64> = m.iter().map(|&c| mul_mod(c, d, q)).collect();
            self.ntt_q[l].forward(&mut limb);
            out.push(limb);
        }
        out
    }

    /// Plaintext in centered-lift NTT form, the multiplicand for `mul_pt`.
    fn centered_plain(&self, slots: &[u64]) -> Poly {
        let m = self.plain_coeffs(slots);
        let half = self.p / 2;
        let signed: Vec<i64> = m
            .iter()
            .map(|&c| {
                if c > half {
                    c as i64 - self.p as i64
                } else {
                    c as i64
                }
            })
            .collect();
        self.small_poly(&signed)
    }

    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        pk: &RlwePublic,
        slots: &[u64],
        rng: &mut R,
    ) -> Vec<Poly> {
        let u = self.small_poly(&self.sample_ternary(rng));
        let e1 = self.small_poly(&self.sample_error(rng));
        let e2 = self.small_poly(&self.sample_error(rng));
        let mut c0 = self.mul_poly(&pk.b, &u);
        self.add_assign(&mut c0, &e1);
        self.add_assign(&mut c0, &self.scaled_message(slots));
        let mut c1 = self.mul_poly(&pk.a, &u);
        self.add_assign(&mut c1, &e2);
        vec![c0, c1]
    }

    /// Returns decrypted slots and the remaining noise budget in bits.
    pub fn decrypt(&self, sk: &RlweSecret, ct: &[Poly]) -> (Vec<u64>, f64) {
        let mut v = ct[0].clone();
        let mut s_pow = sk.s.clone();
        for (k, c) in ct.iter().enumerate().skip(1) {
            if k > 1 {
                s_pow = self.mul_poly(&s_pow, &sk.s);
            }
            self.mul_add_assign(&mut v, c, &s_pow);
        }
        for (l, limb) in v.iter_mut().enumerate() {
            self.ntt_q[l].inverse(limb);
        }
        let q = &self.q_crt.product;
        let half = &self.q_crt.half;
        let mut m = vec![0u64; self.n];
        let mut worst = BigUint::zero();
        let mut residues = vec![0u64; self.q.len()];
        for i in 0..self.n {
            for l in 0..self.q.len() {
                residues[l] = v[l][i];
            }
            let x = self.q_crt.reconstruct(&residues);
            let t = x * self.p + half;
            let quot = &t / q;
            let rem = t - &quot * q;
            m[i] = (quot % self.p).to_u64().unwrap_or(0);
            let noise = if &rem >= half { rem - half } else { half - rem };
            if noise > worst {
                worst = noise;
            }
        }
        self.ntt_p.forward(&mut m);
        let worst_bits = worst.to_f64().unwrap_or(f64::INFINITY).max(1.0).log2();
        let budget = half.to_f64().unwrap_or(0.0).log2() - worst_bits;
        (m, budget)
    }

    pub fn add(&self, a: &[Poly], b: &[Poly]) -> Vec<Poly> {
        let mut out = a.to_vec();
        for (x, y) in out.iter_mut().zip(b) {
            self.add_assign(x, y);
        }
        out
    }

    pub fn sub(&self, a: &[Poly], b: &[Poly]) -> Vec<Poly> {
        let mut out = a.to_vec();
        for (x, y) in out.iter_mut().zip(b) {
            self.sub_assign(x, y);
        }
        out
    }

    pub fn add_plain(&self, a: &[Poly], slots: &[u64]) -> Vec<Poly> {
        let mut out = a.to_vec();
        self.add_assign(&mut out[0], &self.scaled_message(slots));
        out
    }

    pub fn sub_plain(&self, a: &[Poly], slots: &[u64]) -> Vec<Poly> {
        let mut out = a.to_vec();
        self.sub_assign(&mut out[0], &self.scaled_message(slots));
        out
    }

    pub fn mul_plain(&self, a: &[Poly], slots: &[u64]) -> Vec<Poly> {
        let m = self.centered_plain(slots);
        a.iter().map(|c| self.mul_poly(c, &m)).collect()
    }

    /// Lifts a NTT-form ciphertext component to the extended basis with centered coefficients.
    fn to_ext(&self, poly: &Poly) -> Poly {
        let k = self.q.len();
        let mut coeff = poly.clone();
        for (l, limb) in coeff.iter_mut().enumerate() {
            self.ntt_q[l].inverse(limb);
        }
        let ext = &self.ext_crt.moduli;
        let mut out: Poly = vec![vec![0u64; self.n]; ext.len()];
        let q = &self.q_crt.product;
        let half = &self.q_crt.half;
        let mut residues = vec![0u64; k];
        for i in 0..self.n {
            for l in 0..k {
                residues[l] = coeff[l][i];
                out[l][i] = coeff[l][i];
            }
            let x = self.q_crt.reconstruct(&residues);
            if &x > half {
                let mag = q - x;
                for (j, &m) in ext.iter().enumerate().skip(k) {
                    out[j][i] = neg_mod((&mag % m).to_u64().unwrap_or(0), m);
                }
            } else {
                for (j, &m) in ext.iter().enumerate().skip(k) {
                    out[j][i] = (&x % m).to_u64().unwrap_or(0);
                }
            }
        }
        for (j, limb) in out.iter_mut().enumerate() {
            self.ntt_ext[j].forward(limb);
        }
        out
    }

    /// Maps an extended-basis NTT-form product back to `round(p·x/q) mod q` in coefficient form.
    fn scale_down(&self, mut poly: Poly) -> Poly {
        for (j, limb) in poly.iter_mut().enumerate() {
            self.ntt_ext[j].inverse(limb);
        }
        let big_q = &self.ext_crt.product;
        let big_half = &self.ext_crt.half;
        let q = &self.q_crt.product;
        let q_half = &self.q_crt.half;
        let mut out: Poly = vec![vec![0u64; self.n]; self.q.len()];
        let mut residues = vec![0u64; poly.len()];
        for i in 0..self.n {
            for (j, limb) in poly.iter().enumerate() {
                residues[j] = limb[i];
            }
            let x = self.ext_crt.reconstruct(&residues);
            let (neg, mag) = if &x > big_half {
                (true, big_q - x)
            } else {
                (false, x)
            };
            let r = (mag * self.p + q_half) / q;
            for (l, &m) in self.q.iter().enumerate() {
                let v = (&r % m).to_u64().unwrap_or(0);
                out[l][i] = if neg { neg_mod(v, m) } else { v };
            }
        }
        out
    }

    fn ext_mul(&self, a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| mul_mod(x, y, m)).collect()
    }

    fn tensor(&self, a: &[Poly], b: Option<&[Poly]>) -> [Poly; 3] {
        let a0 = self.to_ext(&a[0]);
        let a1 = self.to_ext(&a[1]);
        let (b0, b1) = match b {
            Some(b) => (self.to_ext(&b[0]), self.to_ext(&b[1])),
            None => (a0.clone(), a1.clone()),
        };
        let ext = &self.ext_crt.moduli;
        let mut d0 = Vec::with_capacity(ext.len());
        let mut d1 = Vec::with_capacity(ext.len());
        let mut d2 = Vec::with_capacity(ext.len());
        for (j, &m) in ext.iter().enumerate() {
            d0.push(self.ext_mul(&a0[j], &b0[j], m));
            let x: Vec<u64> = a0[j]
                .iter()
                .zip(&b1[j])
                .zip(a1[j].iter().zip(&b0[j]))
                .map(|((&u, &v), (&w, &z))| add_mod(mul_mod(u, v, m), mul_mod(w, z, m), m))
                .collect();
            d1.push(x);
            d2.push(self.ext_mul(&a1[j], &b1[j], m));
        }
        [d0, d1, d2]
    }

    fn relinearize(&self, d: [Poly; 3], rlk: &RlweRelin) -> Vec<Poly> {
        let [d0, d1, d2] = d;
        let mut c0 = d0;
        let mut c1 = d1;
        for (l, limb) in c0.iter_mut().enumerate() {
            self.ntt_q[l].forward(limb);
        }
        for (l, limb) in c1.iter_mut().enumerate() {
            self.ntt_q[l].forward(limb);
        }
        let mask = (1u64 << RELIN_DIGIT_BITS) - 1;
        for i in 0..self.q.len() {
            for j in 0..self.digits {
                let shift = RELIN_DIGIT_BITS as usize * j;
                let digit: Vec<u64> = d2[i].iter().map(|&c| (c >> shift) & mask).collect();
                let mut dpoly: Poly = Vec::with_capacity(self.q.len());
                for (l, &m) in self.q.iter().enumerate() {
                    let mut limb: Vec<u64> = digit.iter().map(|&c| c % m).collect();
                    self.ntt_q[l].forward(&mut limb);
                    dpoly.push(limb);
                }
                let (kb, ka) = &rlk.keys[i * self.digits + j];
                self.mul_add_assign(&mut c0, &dpoly, kb);
                self.mul_add_assign(&mut c1, &dpoly, ka);
            }
        }
        vec![c0, c1]
    }

    pub fn mul(&self, a: &[Poly], b: &[Poly], rlk: &RlweRelin) -> Vec<Poly> {
        let d = self.tensor(a, Some(b));
        let d = d.map(|x| self.scale_down(x));
        self.relinearize(d, rlk)
    }

    pub fn square(&self, a: &[Poly], rlk: &RlweRelin) -> Vec<Poly> {
        let d = self.tensor(a, None);
        let d = d.map(|x| self.scale_down(x));
        self.relinearize(d, rlk)
    }
}
