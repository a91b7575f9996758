//! Imported sub-protocols behind a provider interface.
//!
//! The ideal backend hands party A's shares to party B over an unaccounted
//! sealed frame, evaluates the functionality on the combined input, and
//! returns fresh random shares of the result. Each call is charged to the
//! transcript from a per-gadget cost table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{random_element, Share};
use crate::error::{Error, Result};
use crate::fixedpoint::{Domain, FixedPointConfig};
use crate::party::Party;
use crate::Role;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GadgetKind {
    LessThan,
    BoolToArith,
    Multiplex,
    Wrap,
    Truncate,
    Exp,
    InvSqrt,
}

impl GadgetKind {
    pub fn name(self) -> &'static str {
        match self {
            GadgetKind::LessThan => "lt",
            GadgetKind::BoolToArith => "b2a",
            GadgetKind::Multiplex => "mux",
            GadgetKind::Wrap => "wrap",
            GadgetKind::Truncate => "trunc",
            GadgetKind::Exp => "rexp",
            GadgetKind::InvSqrt => "invsqrt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub bytes_per_element: f64,
    pub rounds: u32,
}

/// Per-gadget byte and round charges; gadgets without an entry cost nothing
/// and are listed in [`crate::CostReport::uncosted`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostTable {
    pub entries: BTreeMap<String, CostEntry>,
}

impl Default for CostTable {
    /// `rexp` at 592,000 bytes and 117 rounds per 128×128 call.
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            "rexp".to_string(),
            CostEntry {
                bytes_per_element: 592_000.0 / 16384.0,
                rounds: 117,
            },
        );
        Self { entries }
    }
}

impl CostTable {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Bytes, rounds, and whether a table entry existed.
    pub fn charge(&self, kind: GadgetKind, elements: usize) -> (u64, u32, bool) {
        match self.entries.get(kind.name()) {
            Some(e) => (
                (e.bytes_per_element * elements as f64).ceil() as u64,
                e.rounds,
                true,
            ),
            None => (0, 0, false),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GadgetBackend {
    /// In-process trusted evaluation with fresh output shares.
    #[default]
    Ideal,
    /// Placeholder for real sub-protocol implementations; every call fails.
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GadgetProvider {
    pub backend: GadgetBackend,
    pub table: CostTable,
}

impl Default for GadgetProvider {
    fn default() -> Self {
        Self::new(GadgetBackend::Ideal, CostTable::default())
    }
}

impl GadgetProvider {
    pub fn new(backend: GadgetBackend, table: CostTable) -> Self {
        Self { backend, table }
    }
}

fn words(values: &[&[u64]]) -> Vec<u8> {
    values
        .iter()
        .flat_map(|v| v.iter())
        .flat_map(|w| w.to_le_bytes())
        .collect()
}

fn unwords(bytes: &[u8]) -> Vec<u64> {
    bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect()
}

const STATUS_OK: u8 = 0;
const STATUS_DOMAIN: u8 = 1;
const STATUS_RANGE: u8 = 2;
const STATUS_OTHER: u8 = 3;

fn encode_error(e: &Error) -> Vec<u8> {
    let (code, index, detail) = match e {
        Error::DomainError { index, detail } => (STATUS_DOMAIN, *index, detail.clone()),
        Error::RangeError { index, detail } => (STATUS_RANGE, *index, detail.clone()),
        other => (STATUS_OTHER, 0, other.to_string()),
    };
    let mut out = vec![code];
    out.extend_from_slice(&(index as u64).to_le_bytes());
    out.extend_from_slice(detail.as_bytes());
    out
}

fn decode_error(bytes: &[u8]) -> Error {
    if bytes.len() < 9 {
        return Error::Frame("short gadget status".into());
    }
    let index = u64::from_le_bytes(bytes[1..9].try_into().expect("8 bytes")) as usize;
    let detail = String::from_utf8_lossy(&bytes[9..]).into_owned();
    match bytes[0] {
        STATUS_DOMAIN => Error::DomainError { index, detail },
        STATUS_RANGE => Error::RangeError { index, detail },
        _ => Error::Frame(format!("peer gadget failure: {detail}")),
    }
}

type Evaluator<'a> =
    Box<dyn FnOnce(&FixedPointConfig, &[Vec<u64>], &[Vec<u64>]) -> Result<Vec<Vec<u64>>> + 'a>;

/// Runs one ideal gadget call and returns this party's output shares.
fn evaluate(
    p: &mut Party,
    kind: GadgetKind,
    inputs: &[&Share],
    outputs: &[Domain],
    f: Evaluator<'_>,
) -> Result<Vec<Share>> {
    if p.gadgets.backend == GadgetBackend::External {
        return Err(Error::GadgetUnavailable(kind.name()));
    }
    if let Some(bad) = inputs.iter().find(|s| s.party != p.role) {
        return Err(Error::DomainMismatch(format!(
            "{} share of {:?} used by {:?}",
            kind.name(),
            bad.party,
            p.role
        )));
    }
    let elements = inputs.first().map_or(0, |s| s.len());
    let own: Vec<&[u64]> = inputs.iter().map(|s| s.values.as_slice()).collect();
    let mine: Vec<Vec<u64>> = match p.role {
        Role::A => {
            p.session.send_sealed(&words(&own))?;
            let reply = p.session.recv_sealed()?;
            match reply.first() {
                Some(&STATUS_OK) => {
                    let flat = unwords(&reply[1..]);
                    let mut out = Vec::with_capacity(outputs.len());
                    let mut at = 0;
                    for _ in outputs {
                        out.push(flat[at..at + elements].to_vec());
                        at += elements;
                    }
                    out
                }
                _ => return Err(decode_error(&reply)),
            }
        }
        Role::B => {
            let flat = unwords(&p.session.recv_sealed()?);
            let mut a_in = Vec::with_capacity(inputs.len());
            let mut at = 0;
            for s in inputs {
                if flat.len() < at + s.len() {
                    p.session
                        .send_sealed(&encode_error(&Error::Frame("length mismatch".into())))?;
                    return Err(Error::ShapeMismatch(format!(
                        "{} input length mismatch",
                        kind.name()
                    )));
                }
                a_in.push(flat[at..at + s.len()].to_vec());
                at += s.len();
            }
            let b_in: Vec<Vec<u64>> = inputs.iter().map(|s| s.values.clone()).collect();
            let secret = match f(&p.cfg, &a_in, &b_in) {
                Ok(v) => v,
                Err(e) => {
                    p.session.send_sealed(&encode_error(&e))?;
                    return Err(e);
                }
            };
            let mut for_a = Vec::with_capacity(outputs.len());
            let mut keep = Vec::with_capacity(outputs.len());
            for (vals, &d) in secret.iter().zip(outputs) {
                let r: Vec<u64> = vals
                    .iter()
                    .map(|_| random_element(d, &p.cfg, &mut p.rng))
                    .collect();
                keep.push(
                    vals.iter()
                        .zip(&r)
                        .map(|(&v, &m)| p.cfg.sub(d, v, m))
                        .collect(),
                );
                for_a.push(r);
            }
            let refs: Vec<&[u64]> = for_a.iter().map(Vec::as_slice).collect();
            let mut reply = vec![STATUS_OK];
            reply.extend(words(&refs));
            p.session.send_sealed(&reply)?;
            keep
        }
    };
    let (bytes, rounds, costed) = p.gadgets.table.charge(kind, elements);
    let label = p.label(kind.name());
    p.session
        .charge_gadget(&label, kind.name(), elements as u64, bytes, rounds, costed);
    Ok(mine
        .into_iter()
        .zip(outputs)
        .map(|(v, &d)| Share::new(d, p.role, v))
        .collect())
}

fn combine(cfg: &FixedPointConfig, d: Domain, a: &[u64], b: &[u64]) -> Vec<i128> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| cfg.lift(d, cfg.add(d, x, y)))
        .collect()
}

fn require(x: &Share, d: Domain, what: &str) -> Result<()> {
    if x.domain != d {
        return Err(Error::DomainMismatch(format!(
            "{what} expects {d:?}, got {:?}",
            x.domain
        )));
    }
    Ok(())
}

fn one(mut v: Vec<Share>) -> Share {
    v.pop().expect("one output")
}

/// Boolean shares of `x < c` for ring shares `x` and a public ring element `c`.
pub fn lt_const(p: &mut Party, x: &Share, c: u64) -> Result<Share> {
    require(x, Domain::Ring, "lt_const")?;
    let f: Evaluator = Box::new(move |cfg, a, b| {
        let c = cfg.lift(Domain::Ring, c);
        Ok(vec![combine(cfg, Domain::Ring, &a[0], &b[0])
            .into_iter()
            .map(|v| u64::from(v < c))
            .collect()])
    });
    Ok(one(evaluate(
        p,
        GadgetKind::LessThan,
        &[x],
        &[Domain::Bool],
        f,
    )?))
}

/// Boolean shares of `x < y` for ring shares.
pub fn lt(p: &mut Party, x: &Share, y: &Share) -> Result<Share> {
    require(x, Domain::Ring, "lt")?;
    require(y, Domain::Ring, "lt")?;
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "lt on {} and {} elements",
            x.len(),
            y.len()
        )));
    }
    let f: Evaluator = Box::new(|cfg, a, b| {
        let xs = combine(cfg, Domain::Ring, &a[0], &b[0]);
        let ys = combine(cfg, Domain::Ring, &a[1], &b[1]);
        Ok(vec![xs
            .iter()
            .zip(&ys)
            .map(|(u, v)| u64::from(u < v))
            .collect()])
    });
    Ok(one(evaluate(
        p,
        GadgetKind::LessThan,
        &[x, y],
        &[Domain::Bool],
        f,
    )?))
}

/// Arithmetic shares in `target` reconstructing to `b·2^scale + 2^scale`.
pub fn b2a(p: &mut Party, b: &Share, target: Domain, scale: u32) -> Result<Share> {
    require(b, Domain::Bool, "b2a")?;
    if target == Domain::Bool {
        return Err(Error::DomainMismatch("b2a into the boolean domain".into()));
    }
    let f: Evaluator = Box::new(move |cfg, a, bb| {
        let unit = 1i128 << scale;
        Ok(vec![a[0]
            .iter()
            .zip(&bb[0])
            .map(|(&x, &y)| cfg.reduce(target, ((x ^ y) & 1) as i128 * unit + unit))
            .collect()])
    });
    Ok(one(evaluate(
        p,
        GadgetKind::BoolToArith,
        &[b],
        &[target],
        f,
    )?))
}

/// Shares of `sel·x` in the domain of `x`.
pub fn mux(p: &mut Party, sel: &Share, x: &Share) -> Result<Share> {
    require(sel, Domain::Bool, "mux selector")?;
    if x.domain == Domain::Bool || x.len() != sel.len() {
        return Err(Error::ShapeMismatch(
            "mux needs an arithmetic share of the selector's length".into(),
        ));
    }
    let d = x.domain;
    let f: Evaluator = Box::new(move |cfg, a, b| {
        Ok(vec![a[0]
            .iter()
            .zip(&b[0])
            .zip(a[1].iter().zip(&b[1]))
            .map(|((&s0, &s1), (&x0, &x1))| {
                if (s0 ^ s1) & 1 == 1 {
                    cfg.add(d, x0, x1)
                } else {
                    0
                }
            })
            .collect()])
    });
    Ok(one(evaluate(p, GadgetKind::Multiplex, &[sel, x], &[d], f)?))
}

/// Boolean shares of the carry `a + b >= M` of the two raw shares.
pub fn wrap(p: &mut Party, x: &Share) -> Result<Share> {
    if x.domain == Domain::Bool {
        return Err(Error::DomainMismatch("wrap of a boolean share".into()));
    }
    let d = x.domain;
    let f: Evaluator = Box::new(move |cfg, a, b| {
        let m = cfg.modulus(d);
        Ok(vec![a[0]
            .iter()
            .zip(&b[0])
            .map(|(&u, &v)| u64::from(u as u128 + v as u128 >= m))
            .collect()])
    });
    Ok(one(evaluate(
        p,
        GadgetKind::Wrap,
        &[x],
        &[Domain::Bool],
        f,
    )?))
}

/// Ring shares of `floor(x / 2^shift)` on the signed reading of `x`.
pub fn trunc(p: &mut Party, x: &Share, shift: u32) -> Result<Share> {
    require(x, Domain::Ring, "trunc")?;
    let f: Evaluator = Box::new(move |cfg, a, b| {
        Ok(vec![combine(cfg, Domain::Ring, &a[0], &b[0])
            .into_iter()
            .map(|v| cfg.reduce(Domain::Ring, v >> shift))
            .collect()])
    });
    Ok(one(evaluate(
        p,
        GadgetKind::Truncate,
        &[x],
        &[Domain::Ring],
        f,
    )?))
}

/// Field shares of `round(e^x · 2^out_scale)` for ring shares of `x <= 0` at `in_scale`.
pub fn rexp(p: &mut Party, x: &Share, in_scale: u32, out_scale: u32) -> Result<Share> {
    require(x, Domain::Ring, "rexp")?;
    let f: Evaluator = Box::new(move |cfg, a, b| {
        let mut out = Vec::with_capacity(a[0].len());
        for (i, v) in combine(cfg, Domain::Ring, &a[0], &b[0])
            .into_iter()
            .enumerate()
        {
            if v > 2 {
                return Err(Error::RangeError {
                    index: i,
                    detail: format!(
                        "exponent {} is positive",
                        v as f64 / (in_scale as f64).exp2()
                    ),
                });
            }
            let e = (v as f64 / (in_scale as f64).exp2()).exp() * (out_scale as f64).exp2();
            out.push(cfg.reduce(Domain::Field, e.round() as i128));
        }
        Ok(vec![out])
    });
    Ok(one(evaluate(
        p,
        GadgetKind::Exp,
        &[x],
        &[Domain::Field],
        f,
    )?))
}

/// Shares in `out_domain` of `round(2^out_scale / sqrt(x))` for shares of `x > 0` at `in_scale`.
pub fn invsqrt(
    p: &mut Party,
    x: &Share,
    in_scale: u32,
    out_scale: u32,
    out_domain: Domain,
) -> Result<Share> {
    if x.domain == Domain::Bool || out_domain == Domain::Bool {
        return Err(Error::DomainMismatch("invsqrt on boolean shares".into()));
    }
    let d = x.domain;
    let f: Evaluator = Box::new(move |cfg, a, b| {
        let mut out = Vec::with_capacity(a[0].len());
        for (i, v) in combine(cfg, d, &a[0], &b[0]).into_iter().enumerate() {
            if v <= 0 {
                return Err(Error::DomainError {
                    index: i,
                    detail: format!("inverse square root of {v}"),
                });
            }
            let real = v as f64 / (in_scale as f64).exp2();
            let y = (out_scale as f64).exp2() / real.sqrt();
            out.push(cfg.reduce(out_domain, y.round() as i128));
        }
        Ok(vec![out])
    });
    Ok(one(evaluate(
        p,
        GadgetKind::InvSqrt,
        &[x],
        &[out_domain],
        f,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::fixedpoint::encode;
    use crate::party::run_pair;
    use crate::sharing::{reconstruct, share};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn toy() -> Config {
        let mut c = Config::clear();
        c.fixedpoint = FixedPointConfig::new(10, 3, 13).unwrap();
        c.he.degree = 2;
        c
    }

    fn pair_run(
        cfg: &Config,
        secrets: &[u64],
        d: Domain,
        g: impl Fn(&mut Party, &Share) -> Result<Share> + Sync,
    ) -> Result<Vec<u64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let (sa, sb) = share(secrets, d, &cfg.fixedpoint, &mut rng)?;
        let (a, b) = run_pair(cfg, 5, |p| g(p, &sa), |p| g(p, &sb))?;
        reconstruct(&a, &b, &cfg.fixedpoint)
    }

    #[test]
    fn lt_exhaustive_toy_ring() {
        let cfg = toy();
        let fp = cfg.fixedpoint;
        let xs: Vec<u64> = (0..1u64 << 10).collect();
        for c in [0i128, 5, -1, -300, 511, -512] {
            let ce = fp.reduce(Domain::Ring, c);
            let got = pair_run(&cfg, &xs, Domain::Ring, |p, x| lt_const(p, x, ce)).unwrap();
            for (&x, &g) in xs.iter().zip(&got) {
                assert_eq!(g, u64::from(fp.lift(Domain::Ring, x) < c), "x={x} c={c}");
            }
        }
    }

    #[test]
    fn lt_examples_at_default_scale() {
        let cfg = Config::clear();
        let fp = cfg.fixedpoint;
        let x = [encode(-6.0, &fp, Domain::Ring).unwrap().value, 0];
        let c = encode(-5.075, &fp, Domain::Ring).unwrap().value;
        let got = pair_run(&cfg, &x, Domain::Ring, |p, s| lt_const(p, s, c)).unwrap();
        assert_eq!(got, vec![1, 0]);
        let got = pair_run(&cfg, &[0], Domain::Ring, |p, s| lt_const(p, s, 0)).unwrap();
        assert_eq!(got, vec![0]);
    }

    #[test]
    fn b2a_offset_convention() {
        let cfg = Config::clear();
        for _ in 0..100 {
            let got = pair_run(&cfg, &[0, 1], Domain::Bool, |p, b| {
                b2a(p, b, Domain::Ring, 12)
            })
            .unwrap();
            assert_eq!(got, vec![4096, 8192]);
        }
        let got = pair_run(&cfg, &[0, 1], Domain::Bool, |p, b| {
            b2a(p, b, Domain::Field, 0)
        })
        .unwrap();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    fn trunc_exhaustive_toy_ring() {
        let cfg = toy();
        let fp = cfg.fixedpoint;
        let xs: Vec<u64> = (0..1u64 << 10).collect();
        let got = pair_run(&cfg, &xs, Domain::Ring, |p, x| trunc(p, x, 4)).unwrap();
        for (&x, &g) in xs.iter().zip(&got) {
            assert_eq!(
                g,
                fp.reduce(Domain::Ring, fp.lift(Domain::Ring, x).div_euclid(16))
            );
        }
    }

    #[test]
    fn rexp_examples_and_sweep() {
        let cfg = Config::clear();
        let fp = cfg.fixedpoint;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut xs = vec![0, encode(-1.0, &fp, Domain::Ring).unwrap().value];
        xs.extend(
            (0..10_000).map(|_| fp.reduce(Domain::Ring, -(rng.gen_range(0..=16 * 4096) as i128))),
        );
        let got = pair_run(&cfg, &xs, Domain::Ring, |p, x| rexp(p, x, 12, 12)).unwrap();
        assert_eq!(got[0], 4096);
        assert_eq!(got[1], (4096.0 * (-1f64).exp()).round() as u64);
        for (&x, &g) in xs.iter().zip(&got) {
            let oracle = (fp.lift(Domain::Ring, x) as f64 / 4096.0).exp() * 4096.0;
            assert!((g as f64 - oracle).abs() <= 2.0);
        }
    }

    #[test]
    fn rexp_rejects_positive() {
        let cfg = Config::clear();
        let err = pair_run(&cfg, &[4096], Domain::Ring, |p, x| rexp(p, x, 12, 12)).unwrap_err();
        assert!(matches!(err, Error::RangeError { index: 0, .. }));
    }

    #[test]
    fn invsqrt_examples_and_errors() {
        let cfg = Config::clear();
        let got = pair_run(&cfg, &[4 * 4096, 4096], Domain::Ring, |p, x| {
            invsqrt(p, x, 12, 12, Domain::Ring)
        })
        .unwrap();
        assert_eq!(got, vec![2048, 4096]);
        let sweep: Vec<u64> = (1..=1u64 << 24).step_by(997).collect();
        let got = pair_run(&cfg, &sweep, Domain::Ring, |p, x| {
            invsqrt(p, x, 12, 12, Domain::Ring)
        })
        .unwrap();
        for (&x, &g) in sweep.iter().zip(&got) {
            let oracle = 4096.0 / (x as f64 / 4096.0).sqrt();
            assert!((g as f64 - oracle).abs() <= 2.0, "x={x}");
        }
        let err = pair_run(&cfg, &[5, 0], Domain::Ring, |p, x| {
            invsqrt(p, x, 12, 12, Domain::Ring)
        })
        .unwrap_err();
        assert!(matches!(err, Error::DomainError { index: 1, .. }));
    }

    #[test]
    fn mux_selects() {
        let cfg = Config::clear();
        let fp = cfg.fixedpoint;
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let (sa, sb) = share(&[0, 1, 1], Domain::Bool, &fp, &mut rng).unwrap();
        let (xa, xb) = share(&[7, 8, fp.p - 1], Domain::Field, &fp, &mut rng).unwrap();
        let (a, b) = run_pair(&cfg, 1, |p| mux(p, &sa, &xa), |p| mux(p, &sb, &xb)).unwrap();
        assert_eq!(reconstruct(&a, &b, &fp).unwrap(), vec![0, 8, fp.p - 1]);
    }

    #[test]
    fn charges_follow_table() {
        let cfg = Config::clear();
        let xs = vec![0u64; 16384];
        let (report, _) = run_pair(
            &cfg,
            1,
            |p| {
                let s = Share::zeros(Domain::Ring, Role::A, xs.len());
                Ok(p.scoped("t", |p| rexp(p, &s, 12, 12))?.1)
            },
            |p| {
                let s = Share::zeros(Domain::Ring, Role::B, xs.len());
                Ok(p.scoped("t", |p| rexp(p, &s, 12, 12))?.1)
            },
        )
        .unwrap();
        assert_eq!(report.total_bytes(), 592_000);
        assert_eq!(report.round_count, 117);
        assert!(report.uncosted.is_empty());
    }

    #[test]
    fn external_backend_is_unavailable() {
        let mut cfg = Config::clear();
        cfg.gadgets.backend = GadgetBackend::External;
        let err =
            pair_run(&cfg, &[1], Domain::Bool, |p, b| b2a(p, b, Domain::Ring, 0)).unwrap_err();
        assert!(matches!(err, Error::GadgetUnavailable("b2a")));
    }
}
