//! LayerNorm as `γ·√n·a/√(Σa²) + β` with `a = n·x − Σx`.
//!
//! The centered rows are pre-shifted so the per-row sum of squares fits the
//! plaintext field, and the gadget only ever sees that one sum per row.

use crate::error::{Error, Result};
use crate::fixedpoint::{field_to_ring, ring_to_field, truncate_shares, Domain, FixedPointConfig};
use crate::party::Party;
use crate::sharing::{invsqrt, random_vector, Share};
use crate::Role;

use super::{
    add_plain, check_len, mul_cts, mul_plain, recv_complete, row_sums, square_cts, sub_plain,
    tile_rows, ProtocolOutput,
};

/// Scale and gain held by party B, field elements at scale `s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LnParams {
    pub gamma: Vec<u64>,
    pub beta: Vec<u64>,
}

impl LnParams {
    pub fn new(gamma: Vec<u64>, beta: Vec<u64>) -> Result<Self> {
        if gamma.len() != beta.len() || gamma.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "gamma {} vs beta {}",
                gamma.len(),
                beta.len()
            )));
        }
        Ok(Self { gamma, beta })
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }
}

/// Public scale schedule for rows of width `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LnPlan {
    pub n: usize,
    /// Bits dropped from `a` before squaring.
    pub pre_shift: u32,
    /// Output scale of the inverse square root.
    pub inv_bits: u32,
    /// Scale of `z·2^z_bits/√n` after the first decrypt-side truncation.
    pub z_bits: u32,
    /// Scale of the affine output before the final truncation.
    pub out_bits: u32,
}

impl LnPlan {
    pub fn new(cfg: &FixedPointConfig, n: usize, max_variance: f64) -> Result<Self> {
        if n < 2 || !(max_variance > 0.0) {
            return Err(Error::Config(format!(
                "layernorm needs n >= 2 and a positive variance bound, got {n}"
            )));
        }
        let field_bits = cfg.p.ilog2();
        let log_n = (n as f64).log2();
        let room =
            ((field_bits as f64 - 1.0 - 3.0 * log_n - max_variance.log2()) / 2.0).floor() as i64;
        let pre_shift = (cfg.s as i64 - room).max(0) as u32;
        let inv_bits = field_bits - 2;
        let z_bits = 10 + (log_n / 2.0).ceil() as u32;
        let out_bits = field_bits - 5;
        if z_bits > inv_bits || out_bits < z_bits || out_bits < cfg.s || pre_shift >= cfg.k {
            return Err(Error::Config(format!(
                "layernorm width {n} does not fit the field"
            )));
        }
        Ok(Self {
            n,
            pre_shift,
            inv_bits,
            z_bits,
            out_bits,
        })
    }

    /// Scale of the gain multiplier `round(γ√n·2^gain_bits)`.
    pub fn gain_bits(&self) -> u32 {
        self.out_bits - self.z_bits
    }
}

/// Ciphertexts exchanged for a `rows × n` input: six groups of the matrix and two of per-row values.
pub fn layernorm_ciphertexts(rows: usize, n: usize, slots: usize) -> usize {
    6 * (rows * n).div_ceil(slots) + 2 * rows.div_ceil(slots)
}

/// Ring shares of `x` at scale `s` in, ring shares of LayerNorm at scale `s` out.
/// Party B supplies `params`; party A passes `None`.
pub fn pi_ln(
    p: &mut Party,
    x: &Share,
    rows: usize,
    n: usize,
    params: Option<&LnParams>,
) -> Result<ProtocolOutput> {
    check_len("layernorm", x.len(), rows, n)?;
    if x.domain != Domain::Ring {
        return Err(Error::DomainMismatch("layernorm takes ring shares".into()));
    }
    match (p.role, params) {
        (Role::B, None) => return Err(Error::Config("party B must supply gamma and beta".into())),
        (Role::B, Some(ps)) if ps.width() != n => {
            return Err(Error::ShapeMismatch(format!(
                "params of width {} for rows of {n}",
                ps.width()
            )));
        }
        _ => {}
    }
    let plan = LnPlan::new(&p.cfg, n, p.max_variance)?;
    let len = rows * n;
    let (share, cost) = p.scoped("layernorm", |p| {
        let cfg = p.cfg;
        let v = p.ct_count(len);
        let c = p.ct_count(rows);

        let sums = row_sums(&cfg, Domain::Ring, &x.values, n);
        let centered = x
            .mul_scalar(n as u64, &cfg)
            .sub(&Share::new(Domain::Ring, p.role, tile_rows(&sums, n)), &cfg)?;
        let shifted = truncate_shares(p, &centered, plan.pre_shift, true)?;
        let a = ring_to_field(p, &shifted)?;

        let k_field = match p.role {
            Role::A => {
                let a_enc = recv_complete(p, "a_share", v, &a)?;
                let r = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                let neg_sr: Vec<u64> = row_sums(&cfg, Domain::Field, &r, n)
                    .into_iter()
                    .map(|t| cfg.neg(Domain::Field, t))
                    .collect();
                let mut out = add_plain(&p.he, &square_cts(p, &a_enc)?, &r)?;
                out.extend(p.encrypt(&neg_sr)?);
                p.send_cts("sq_mask", &out)?;
                let k = p.recv_decrypt("k_mask", c, rows)?;
                (Share::new(Domain::Field, Role::A, k), Some(a_enc))
            }
            Role::B => {
                let own = p.encrypt(&a.values)?;
                p.send_cts("a_share", &own)?;
                let got = p.recv_cts("sq_mask", v + c)?;
                let t = row_sums(&cfg, Domain::Field, &p.decrypt(&got[..v], len)?, n);
                let blind = random_vector(Domain::Field, rows, &cfg, &mut p.rng);
                let shift: Vec<u64> = t
                    .iter()
                    .zip(&blind)
                    .map(|(&a, &b)| cfg.sub(Domain::Field, a, b))
                    .collect();
                p.send_cts("k_mask", &add_plain(&p.he, &got[v..], &shift)?)?;
                (Share::new(Domain::Field, Role::B, blind), None)
            }
        };
        let (k_share, a_enc) = k_field;
        let rho = invsqrt(p, &k_share, 0, plan.inv_bits, Domain::Field).map_err(|e| match e {
            Error::DomainError { index, .. } => Error::DegenerateRow { row: index },
            other => other,
        })?;
        let rho_tiled = Share::new(Domain::Field, p.role, tile_rows(&rho.values, n));

        let z_field = match p.role {
            Role::A => {
                let rho_enc = recv_complete(p, "rho_share", v, &rho_tiled)?;
                let prod = mul_cts(p, &a_enc.unwrap(), &rho_enc)?;
                let mask = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                p.send_cts("z_mask", &sub_plain(&p.he, &prod, &mask)?)?;
                Share::new(Domain::Field, Role::A, mask)
            }
            Role::B => {
                let own = p.encrypt(&rho_tiled.values)?;
                p.send_cts("rho_share", &own)?;
                Share::new(Domain::Field, Role::B, p.recv_decrypt("z_mask", v, len)?)
            }
        };
        let z = field_to_ring(p, &z_field, true)?;
        let z = truncate_shares(p, &z, plan.inv_bits - plan.z_bits, true)?;
        let z = ring_to_field(p, &z)?;

        let y_field = match p.role {
            Role::A => {
                let own = p.encrypt(&z.values)?;
                p.send_cts("z_enc", &own)?;
                Share::new(Domain::Field, Role::A, p.recv_decrypt("y_mask", v, len)?)
            }
            Role::B => {
                let ps = params.unwrap();
                let z_enc = recv_complete(p, "z_enc", v, &z)?;
                let unit = (cfg.s as f64).exp2();
                let gain_unit = (plan.gain_bits() as f64).exp2() * (n as f64).sqrt();
                let gain: Vec<u64> = ps
                    .gamma
                    .iter()
                    .map(|&g| {
                        let real = cfg.lift(Domain::Field, g) as f64 / unit;
                        cfg.reduce(Domain::Field, (real * gain_unit).round() as i128)
                    })
                    .collect();
                let lift = 1u64 << (plan.out_bits - cfg.s);
                let offset: Vec<u64> = ps
                    .beta
                    .iter()
                    .map(|&b| cfg.mul(Domain::Field, b, lift))
                    .collect();
                let gain = gain.repeat(rows);
                let offset = offset.repeat(rows);
                let y = add_plain(&p.he, &mul_plain(&p.he, &z_enc, &gain)?, &offset)?;
                let mask = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                p.send_cts("y_mask", &sub_plain(&p.he, &y, &mask)?)?;
                Share::new(Domain::Field, Role::B, mask)
            }
        };
        let y = field_to_ring(p, &y_field, true)?;
        truncate_shares(p, &y, plan.out_bits - cfg.s, true)
    })?;
    Ok(ProtocolOutput {
        share,
        rows,
        cols: n,
        scale: p.cfg.s,
        cost,
    })
}
