//! Row-wise softmax over ring shares.
//!
//! The row maximum is removed first so every exponent is at most zero. The
//! exponentials are summed under a row mask, blinded by a multiplicative
//! factor from B, and A inverts the blinded sum in the clear.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fixedpoint::{field_to_ring, truncate_shares, Domain};
use crate::party::Party;
use crate::sharing::{lt, mux, random_vector, rexp, Share};
use crate::Role;

use super::{
    add_plain, check_len, complete, mul_cts, mul_plain, row_sums, sub_plain, tile_rows,
    ProtocolOutput,
};

/// Extra fractional bits carried by the reciprocal before the final truncation.
pub const RECIPROCAL_BITS: u32 = 14;

/// Bounds of the multiplicative row blind.
const BLIND_LO: u64 = 16;
const BLIND_HI: u64 = 64;

/// Ciphertexts exchanged for a `rows × cols` input: four groups of the
/// matrix and two of per-row values.
pub fn softmax_ciphertexts(rows: usize, cols: usize, slots: usize) -> usize {
    4 * (rows * cols).div_ceil(slots) + 2 * rows.div_ceil(slots)
}

/// Shares of the per-row maximum of ring shares.
fn row_max(p: &mut Party, x: &Share, rows: usize, cols: usize) -> Result<Share> {
    let cfg = p.cfg;
    let mut cur = x.clone();
    let mut width = cols;
    while width > 1 {
        let half = width / 2;
        let left = cur.gather((0..rows).flat_map(|r| (0..half).map(move |j| r * width + 2 * j)));
        let right =
            cur.gather((0..rows).flat_map(|r| (0..half).map(move |j| r * width + 2 * j + 1)));
        let sel = lt(p, &left, &right)?;
        let pick = mux(p, &sel, &right.sub(&left, &cfg)?)?;
        let best = left.add(&pick, &cfg)?;
        let next = width.div_ceil(2);
        let mut values = Vec::with_capacity(rows * next);
        for r in 0..rows {
            values.extend_from_slice(&best.values[r * half..(r + 1) * half]);
            if width % 2 == 1 {
                values.push(cur.values[r * width + width - 1]);
            }
        }
        cur = Share::new(Domain::Ring, x.party, values);
        width = next;
    }
    Ok(cur)
}

/// Ring shares of `x` at scale `s` in, ring shares of the row-wise softmax at scale `s` out.
/// Party A's output share is its mask; party B's is the decryption.
pub fn pi_softmax(p: &mut Party, x: &Share, rows: usize, cols: usize) -> Result<ProtocolOutput> {
    check_len("softmax", x.len(), rows, cols)?;
    if x.domain != Domain::Ring {
        return Err(Error::DomainMismatch("softmax takes ring shares".into()));
    }
    let cfg = p.cfg;
    let s = cfg.s;
    let needed = (cols as u128) << (s + BLIND_HI.ilog2());
    if needed >= (cfg.p / 2) as u128 {
        return Err(Error::CapacityExceeded {
            needed: needed as usize,
            available: (cfg.p / 2) as usize,
        });
    }
    let len = rows * cols;
    let (share, cost) = p.scoped("softmax", |p| {
        let max = row_max(p, x, rows, cols)?;
        let z = x.sub(
            &Share::new(Domain::Ring, p.role, tile_rows(&max.values, cols)),
            &cfg,
        )?;
        let e = rexp(p, &z, s, s)?;
        let v_count = p.ct_count(len);
        let c_count = p.ct_count(rows);
        let y = match p.role {
            Role::A => {
                let e_b = p.recv_cts("e_share", v_count)?;
                let e_enc = complete(&p.he, &e_b, &e)?;
                let r = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                let sr = row_sums(&cfg, Domain::Field, &r, cols);
                let mut s1 = add_plain(&p.he, &e_enc, &r)?;
                s1.extend(p.encrypt(&sr)?);
                p.send_cts("s1", &s1)?;

                let s2 = p.recv_cts("s2", c_count + v_count)?;
                let w = p.decrypt(&s2[..c_count], rows)?;
                let unit = 1u128 << (s + RECIPROCAL_BITS);
                let mut recip = Vec::with_capacity(rows);
                for (row, &wv) in w.iter().enumerate() {
                    if wv == 0 || wv > cfg.p / 2 {
                        return Err(Error::DomainError {
                            index: row,
                            detail: format!("blinded row sum {wv}"),
                        });
                    }
                    let wv = wv as u128;
                    recip.push(((unit + wv / 2) / wv) as u64);
                }
                let scaled = mul_plain(&p.he, &s2[c_count..], &tile_rows(&recip, cols))?;
                let y = mul_cts(p, &scaled, &e_enc)?;
                let m = random_vector(Domain::Field, len, &cfg, &mut p.rng);
                let back = sub_plain(&p.he, &y, &m)?;
                p.send_cts("y_return", &back)?;
                Share::new(Domain::Field, Role::A, m)
            }
            Role::B => {
                let own = p.encrypt(&e.values)?;
                p.send_cts("e_share", &own)?;

                let s1 = p.recv_cts("s1", v_count + c_count)?;
                let masked = p.decrypt(&s1[..v_count], len)?;
                let t = row_sums(&cfg, Domain::Field, &masked, cols);
                let blind: Vec<u64> = (0..rows)
                    .map(|_| p.rng.gen_range(BLIND_LO..BLIND_HI))
                    .collect();
                let neg_blind: Vec<u64> =
                    blind.iter().map(|&v| cfg.neg(Domain::Field, v)).collect();
                let tv: Vec<u64> = t
                    .iter()
                    .zip(&blind)
                    .map(|(&a, &b)| cfg.mul(Domain::Field, a, b))
                    .collect();
                let mut s2 = add_plain(&p.he, &mul_plain(&p.he, &s1[v_count..], &neg_blind)?, &tv)?;
                s2.extend(p.encrypt(&tile_rows(&blind, cols))?);
                p.send_cts("s2", &s2)?;

                let back = p.recv_cts("y_return", v_count)?;
                Share::new(Domain::Field, Role::B, p.decrypt(&back, len)?)
            }
        };
        let y = field_to_ring(p, &y, true)?;
        truncate_shares(p, &y, RECIPROCAL_BITS, true)
    })?;
    Ok(ProtocolOutput {
        share,
        rows,
        cols,
        scale: s,
        cost,
    })
}
