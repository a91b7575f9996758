//! Five-piece GeLU on a SIMD ciphertext held by party B.
//!
//! Four comparisons give a one-hot segment code. Each fitted piece is
//! evaluated around the midpoint of its interval so the powers stay small,
//! and B selects the live piece homomorphically.

use ptinfer_he::Ciphertext;

use crate::approx::{self, PiecewisePoly, Symmetry};
use crate::error::{Error, Result};
use crate::fixedpoint::{field_to_ring, ring_to_field, truncate_shares, Domain, FixedPointConfig};
use crate::party::Party;
use crate::sharing::{b2a, lt_const, random_vector, Share};
use crate::Role;

use super::{
    add_cts, complete, mul_cts, mul_plain, recv_complete, square_cts, sub_plain, ProtocolOutput,
};

/// Fractional bits of the recentered piece coefficients.
pub const COEF_BITS: u32 = 18;

const PIECES: usize = 5;
const FITTED: usize = 3;
const MAX_DEGREE: usize = 4;

/// Public constants derived from a five-piece table at one fixed-point configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeluPlan {
    /// `ceil(b·2^s)` for each boundary, as signed integers.
    pub thresholds: [i128; 4],
    /// Quantized midpoint of each fitted piece at scale `s`.
    pub centers: [i128; FITTED],
    /// Recentered coefficients at scale `COEF_BITS`, lowest degree first, padded to degree 4.
    pub coefs: [[i128; MAX_DEGREE + 1]; FITTED],
    /// Left tail constant at scale `s`.
    pub left: i128,
    /// Offset of the `x + c` right tail at scale `s`.
    pub right: i128,
}

impl GeluPlan {
    pub fn new(cfg: &FixedPointConfig, table: &PiecewisePoly<f64>) -> Result<Self> {
        let bad = |why: &str| {
            Error::Config(format!(
                "table {} unusable for the gelu protocol: {why}",
                table.name
            ))
        };
        if table.symmetry != Symmetry::None || table.segments.len() != PIECES {
            return Err(bad("needs five pieces without symmetry"));
        }
        if table.segments[0].len() != 1 {
            return Err(bad("left tail must be constant"));
        }
        let right = &table.segments[PIECES - 1];
        if right.len() != 2 || right[1] != 1.0 {
            return Err(bad("right tail must be x + c"));
        }
        let unit = (cfg.s as f64).exp2();
        let coef_unit = (COEF_BITS as f64).exp2();
        let b = &table.boundaries;
        let mut plan = GeluPlan {
            thresholds: [0; 4],
            centers: [0; FITTED],
            coefs: [[0; MAX_DEGREE + 1]; FITTED],
            left: (table.segments[0][0] * unit).round() as i128,
            right: (right[0] * unit).round() as i128,
        };
        for (t, &bv) in plan.thresholds.iter_mut().zip(b) {
            *t = (bv * unit).ceil() as i128;
        }
        for i in 0..FITTED {
            let seg = &table.segments[i + 1];
            if seg.len() > MAX_DEGREE + 1 {
                return Err(bad("fitted pieces must have degree at most 4"));
            }
            let center = ((b[i] + b[i + 1]) / 2.0 * unit).round();
            plan.centers[i] = center as i128;
            let shifted = approx::recenter(seg, center / unit);
            for (d, &c) in plan.coefs[i].iter_mut().zip(&shifted) {
                *d = (c * coef_unit).round() as i128;
            }
        }
        Ok(plan)
    }

    /// Plan for the shipped table.
    pub fn standard(cfg: &FixedPointConfig) -> Self {
        Self::new(cfg, &approx::gelu()).expect("shipped gelu table fits the protocol")
    }
}

/// Ciphertexts exchanged for `len` elements: fourteen groups of `ceil(len/N)`.
pub fn gelu_ciphertexts(len: usize, slots: usize) -> usize {
    14 * len.div_ceil(slots)
}

fn part(x: &Share, i: usize, len: usize) -> Share {
    x.gather(i * len..(i + 1) * len)
}

/// Encrypts each share group separately so groups stay slot-aligned.
fn encrypt_groups(p: &mut Party, groups: &[&Share]) -> Result<Vec<Ciphertext>> {
    let mut out = Vec::new();
    for g in groups {
        out.extend(p.encrypt(&g.values)?);
    }
    Ok(out)
}

fn complete_groups(p: &Party, cts: &[Ciphertext], own: &[&Share]) -> Result<Vec<Vec<Ciphertext>>> {
    let v = cts.len() / own.len();
    own.iter()
        .enumerate()
        .map(|(i, s)| complete(&p.he, &cts[i * v..(i + 1) * v], s))
        .collect()
}

/// Multiplies a ciphertext group by a public constant.
fn scale_cts(p: &Party, cts: &[Ciphertext], c: i128, len: usize) -> Result<Vec<Ciphertext>> {
    mul_plain(&p.he, cts, &vec![p.cfg.reduce(Domain::Field, c); len])
}

fn sub_cts(p: &Party, a: &[Ciphertext], b: &[Ciphertext]) -> Result<Vec<Ciphertext>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| Ok(p.he.sub_ct(x, y)?))
        .collect()
}

/// Ring shares of the one-hot piece code of ring shares `x`, piece-major (`5·len` elements).
pub fn segment_code(p: &mut Party, plan: &GeluPlan, x: &Share) -> Result<Share> {
    let cfg = p.cfg;
    let mut below = Vec::with_capacity(4);
    for &t in &plan.thresholds {
        below.push(lt_const(p, x, cfg.reduce(Domain::Ring, t))?);
    }
    let bits = Share::concat(&[
        below[0].clone(),
        below[0].xor(&below[1])?,
        below[1].xor(&below[2])?,
        below[2].xor(&below[3])?,
        below[3].not(),
    ])?;
    Ok(b2a(p, &bits, Domain::Ring, 0)?.add_scalar(cfg.neg(Domain::Ring, 1), &cfg))
}

/// Party B passes `[[X]]` encrypted under A's key (field, scale `s`); party A passes `None`.
/// Returns field shares of the piecewise GeLU at scale `s`: A holds the decryption, B the mask.
pub fn pi_gelu(
    p: &mut Party,
    plan: &GeluPlan,
    x: Option<&[Ciphertext]>,
    len: usize,
) -> Result<ProtocolOutput> {
    if len == 0 {
        return Err(Error::ShapeMismatch("gelu on an empty vector".into()));
    }
    let v = p.ct_count(len);
    let x_enc: Option<Vec<Ciphertext>> = match (p.role, x) {
        (Role::B, Some(cts)) if cts.len() == v => Some(cts.to_vec()),
        (Role::B, Some(cts)) => {
            return Err(Error::ShapeMismatch(format!(
                "{} ciphertexts for {len} elements",
                cts.len()
            )));
        }
        (Role::B, None) => {
            return Err(Error::Config(
                "party B must supply the encrypted input".into(),
            ))
        }
        (Role::A, _) => None,
    };
    let (share, cost) = p.scoped("gelu", |p| {
        let cfg = p.cfg;
        let s = cfg.s;
        let x_field = match p.role {
            Role::A => Share::new(Domain::Field, Role::A, p.recv_decrypt("x_mask", v, len)?),
            Role::B => {
                let r = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                let masked = sub_plain(&p.he, x_enc.as_ref().unwrap(), &r)?;
                p.send_cts("x_mask", &masked)?;
                Share::new(Domain::Field, Role::B, r)
            }
        };
        let x_ring = field_to_ring(p, &x_field, true)?;

        let b_ring = segment_code(p, plan, &x_ring)?;
        let b_field = ring_to_field(p, &b_ring)?;
        let b_ring: Vec<Share> = (0..PIECES).map(|i| part(&b_ring, i, len)).collect();
        let b_field: Vec<Share> = (0..PIECES).map(|i| part(&b_field, i, len)).collect();

        let mut u_ring = x_ring.clone();
        for (i, &c) in plan.centers.iter().enumerate() {
            u_ring = u_ring.sub(
                &b_ring[i + 1].mul_scalar(cfg.reduce(Domain::Ring, c), &cfg),
                &cfg,
            )?;
        }

        let b_refs: Vec<&Share> = b_field.iter().collect();
        let b_enc = match p.role {
            Role::A => {
                let cts = encrypt_groups(p, &b_refs)?;
                p.send_cts("b_enc", &cts)?;
                None
            }
            Role::B => {
                let cts = p.recv_cts("b_enc", PIECES * v)?;
                Some(complete_groups(p, &cts, &b_refs)?)
            }
        };
        let u_enc = match &b_enc {
            Some(b) => {
                let mut u = x_enc.clone().unwrap();
                for (i, &c) in plan.centers.iter().enumerate() {
                    u = sub_cts(p, &u, &scale_cts(p, &b[i + 1], c, len)?)?;
                }
                Some(u)
            }
            None => None,
        };

        let sq_field = match p.role {
            Role::A => Share::new(Domain::Field, Role::A, p.recv_decrypt("sq_mask", v, len)?),
            Role::B => {
                let r = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                let sq = square_cts(p, u_enc.as_ref().unwrap())?;
                p.send_cts("sq_mask", &sub_plain(&p.he, &sq, &r)?)?;
                Share::new(Domain::Field, Role::B, r)
            }
        };
        let u2_ring = field_to_ring(p, &sq_field, true)?;
        let u2_ring = truncate_shares(p, &u2_ring, s, true)?;
        let u2_field = ring_to_field(p, &u2_ring)?;

        let (u3_field, u4_field) = match p.role {
            Role::A => {
                let cts = encrypt_groups(p, &[&u2_field])?;
                p.send_cts("sq_enc", &cts)?;
                let back = p.recv_cts("pow_mask", 2 * v)?;
                (
                    Share::new(Domain::Field, Role::A, p.decrypt(&back[..v], len)?),
                    Share::new(Domain::Field, Role::A, p.decrypt(&back[v..], len)?),
                )
            }
            Role::B => {
                let u2_enc = recv_complete(p, "sq_enc", v, &u2_field)?;
                let u3 = mul_cts(p, &u2_enc, u_enc.as_ref().unwrap())?;
                let u4 = square_cts(p, &u2_enc)?;
                let r3 = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                let r4 = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                let mut out = sub_plain(&p.he, &u3, &r3)?;
                out.extend(sub_plain(&p.he, &u4, &r4)?);
                p.send_cts("pow_mask", &out)?;
                (
                    Share::new(Domain::Field, Role::B, r3),
                    Share::new(Domain::Field, Role::B, r4),
                )
            }
        };
        let u3_ring = field_to_ring(p, &u3_field, true)?;
        let u3_ring = truncate_shares(p, &u3_ring, s, true)?;
        let u4_ring = field_to_ring(p, &u4_field, false)?;
        let u4_ring = truncate_shares(p, &u4_ring, s, true)?;
        let powers = [&u_ring, &u2_ring, &u3_ring, &u4_ring];

        let mut pieces = Vec::with_capacity(FITTED);
        for coefs in &plan.coefs {
            let constant = cfg.reduce(Domain::Ring, coefs[0] << s);
            let mut g = Share::public(Domain::Ring, p.role, &vec![constant; len]);
            for (pw, &c) in powers.iter().zip(&coefs[1..]) {
                g = g.add(&pw.mul_scalar(cfg.reduce(Domain::Ring, c), &cfg), &cfg)?;
            }
            let g = truncate_shares(p, &g, COEF_BITS, true)?;
            pieces.push(ring_to_field(p, &g)?);
        }
        let piece_refs: Vec<&Share> = pieces.iter().collect();

        match p.role {
            Role::A => {
                let cts = encrypt_groups(p, &piece_refs)?;
                p.send_cts("poly_enc", &cts)?;
                Ok(Share::new(
                    Domain::Field,
                    Role::A,
                    p.recv_decrypt("y_mask", v, len)?,
                ))
            }
            Role::B => {
                let got = p.recv_cts("poly_enc", FITTED * v)?;
                let g_enc = complete_groups(p, &got, &piece_refs)?;
                let b = b_enc.unwrap();
                let mut y = mul_cts(p, &b[PIECES - 1], x_enc.as_ref().unwrap())?;
                for i in 0..FITTED {
                    y = add_cts(&p.he, &y, &mul_cts(p, &b[i + 1], &g_enc[i])?)?;
                }
                if plan.left != 0 {
                    y = add_cts(&p.he, &y, &scale_cts(p, &b[0], plan.left, len)?)?;
                }
                if plan.right != 0 {
                    y = add_cts(&p.he, &y, &scale_cts(p, &b[PIECES - 1], plan.right, len)?)?;
                }
                let m = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                p.send_cts("y_mask", &sub_plain(&p.he, &y, &m)?)?;
                Ok(Share::new(Domain::Field, Role::B, m))
            }
        }
    })?;
    Ok(ProtocolOutput {
        share,
        rows: 1,
        cols: len,
        scale: p.cfg.s,
        cost,
    })
}

/// Share-pair entry: A encrypts its field share under `gelu_input/x_enc`, B completes `[[X]]`.
pub fn pi_gelu_shares(p: &mut Party, plan: &GeluPlan, x: &Share) -> Result<ProtocolOutput> {
    if x.domain != Domain::Field {
        return Err(Error::DomainMismatch("gelu takes field shares".into()));
    }
    let len = x.len();
    let (x_enc, input_cost) = p.scoped("gelu_input", |p| match p.role {
        Role::A => {
            let cts = p.encrypt(&x.values)?;
            p.send_cts("x_enc", &cts)?;
            Ok(None)
        }
        Role::B => {
            let cts = p.recv_cts("x_enc", p.ct_count(len))?;
            Ok(Some(complete(&p.he, &cts, x)?))
        }
    })?;
    let mut out = pi_gelu(p, plan, x_enc.as_deref(), len)?;
    out.cost = input_cost.merge(&out.cost);
    Ok(out)
}
