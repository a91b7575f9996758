//! Share conversion between `Z_{2^k}` and `Z_p`, and truncation of ring shares.

use super::{ConversionMode, Domain, FixedPointConfig, TruncationMode};
use crate::error::{Error, Result};
use crate::party::Party;
use crate::sharing::{mux, trunc, wrap, Share};
use crate::Role;

fn expect(x: &Share, d: Domain, what: &str) -> Result<()> {
    if x.domain != d {
        return Err(Error::DomainMismatch(format!(
            "{what} expects {d:?} shares, got {:?}",
            x.domain
        )));
    }
    Ok(())
}

/// Ring shares to field shares, by the configured mode.
pub fn ring_to_field(p: &mut Party, x: &Share) -> Result<Share> {
    expect(x, Domain::Ring, "ring_to_field")?;
    match p.cfg.ring_to_field {
        ConversionMode::Fast => Ok(ring_to_field_local(&p.cfg, x)),
        ConversionMode::Strict => ring_to_field_strict(p, x),
    }
}

/// Each party lifts its own share to a signed integer and reduces mod `p`.
pub fn ring_to_field_local(cfg: &FixedPointConfig, x: &Share) -> Share {
    Share::new(
        Domain::Field,
        x.party,
        x.values
            .iter()
            .map(|&v| cfg.reduce(Domain::Field, cfg.lift(Domain::Ring, v)))
            .collect(),
    )
}

fn ring_to_field_strict(p: &mut Party, x: &Share) -> Result<Share> {
    let cfg = p.cfg;
    let offset = 1u64 << (cfg.k - 2);
    let shifted = x.add_scalar(offset, &cfg);
    let carry = wrap(p, &shifted)?;
    let two_k = cfg.reduce(Domain::Field, 1i128 << cfg.k);
    let modulus = p.public(Domain::Field, &vec![two_k; x.len()]);
    let correction = mux(p, &carry, &modulus)?;
    let raw = Share::new(
        Domain::Field,
        x.party,
        shifted.values.iter().map(|&v| v % cfg.p).collect(),
    );
    Ok(raw
        .sub(&correction, &cfg)?
        .add_scalar(cfg.neg(Domain::Field, offset % cfg.p), &cfg))
}

/// Field shares to ring shares; `signed` reads the upper half of `Z_p` as negative.
pub fn field_to_ring(p: &mut Party, x: &Share, signed: bool) -> Result<Share> {
    expect(x, Domain::Field, "field_to_ring")?;
    let cfg = p.cfg;
    let half = if signed { (cfg.p - 1) / 2 } else { 0 };
    let shifted = x.add_scalar(half, &cfg);
    let carry = wrap(p, &shifted)?;
    let modulus = p.public(Domain::Ring, &vec![cfg.p; x.len()]);
    let correction = mux(p, &carry, &modulus)?;
    let raw = Share::new(Domain::Ring, x.party, shifted.values.clone());
    Ok(raw
        .sub(&correction, &cfg)?
        .add_scalar(cfg.neg(Domain::Ring, half), &cfg))
}

/// Moves shares to `to`; field-to-ring reads values as signed.
pub fn convert_share(p: &mut Party, x: &Share, to: Domain) -> Result<Share> {
    match (x.domain, to) {
        (a, b) if a == b => Ok(x.clone()),
        (Domain::Ring, Domain::Field) => ring_to_field(p, x),
        (Domain::Field, Domain::Ring) => field_to_ring(p, x, true),
        (a, b) => Err(Error::DomainMismatch(format!(
            "no conversion from {a:?} to {b:?}"
        ))),
    }
}

/// Ring shares of `x / 2^shift`, floored, or rounded when `round` is set.
pub fn truncate_shares(p: &mut Party, x: &Share, shift: u32, round: bool) -> Result<Share> {
    expect(x, Domain::Ring, "truncate_shares")?;
    if shift == 0 {
        return Ok(x.clone());
    }
    let cfg = p.cfg;
    let x = if round {
        x.add_scalar(1u64 << (shift - 1), &cfg)
    } else {
        x.clone()
    };
    match cfg.truncation_mode {
        TruncationMode::Local => Ok(truncate_local(&cfg, &x, shift)),
        TruncationMode::Faithful => trunc(p, &x, shift),
    }
}

/// Non-interactive truncation: A shifts its share, B shifts the negation of its share.
pub fn truncate_local(cfg: &FixedPointConfig, x: &Share, shift: u32) -> Share {
    let mask = cfg.ring_mask();
    let values = x
        .values
        .iter()
        .map(|&v| match x.party {
            Role::A => v >> shift,
            Role::B => {
                let neg = v.wrapping_neg() & mask;
                (neg >> shift).wrapping_neg() & mask
            }
        })
        .collect();
    Share::new(Domain::Ring, x.party, values)
}
