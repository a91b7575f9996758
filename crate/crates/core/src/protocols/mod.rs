//! Two-party protocols for the transformer operators.
//!
//! Every protocol is called by both parties with their own inputs and
//! returns that party's output share plus the cost slice of the call.
//! Messages are labelled `<protocol>/<step>`.

mod gelu;
mod layernorm;
mod matmul;
mod softmax;

pub use gelu::{gelu_ciphertexts, pi_gelu, pi_gelu_shares, segment_code, GeluPlan, COEF_BITS};
pub use layernorm::{layernorm_ciphertexts, pi_ln, LnParams, LnPlan};
pub use matmul::{matmul_ciphertexts, pi_matmul, pi_matmul_shared, MatrixShape, PackedLayout};
pub use softmax::{pi_softmax, softmax_ciphertexts, RECIPROCAL_BITS};

use ptinfer_he::{Ciphertext, HeContext};

use crate::channel::CostReport;
use crate::error::{Error, Result};
use crate::fixedpoint::{Domain, FixedPointConfig};
use crate::party::Party;
use crate::sharing::Share;

/// One party's output of a protocol call.
#[derive(Clone, Debug)]
pub struct ProtocolOutput {
    pub share: Share,
    pub rows: usize,
    pub cols: usize,
    /// Fractional bits of the shared value.
    pub scale: u32,
    pub cost: CostReport,
}

/// `a` (m×n) times `b` (n×h), row-major, in `domain`.
pub fn matmul_local(
    cfg: &FixedPointConfig,
    domain: Domain,
    a: &[u64],
    b: &[u64],
    m: usize,
    n: usize,
    h: usize,
) -> Vec<u64> {
    let modulus = cfg.modulus(domain);
    let mut out = vec![0u64; m * h];
    for i in 0..m {
        let mut acc = vec![0u128; h];
        for l in 0..n {
            let x = a[i * n + l] as u128;
            if x == 0 {
                continue;
            }
            for (j, slot) in acc.iter_mut().enumerate() {
                *slot = (*slot + x * b[l * h + j] as u128) % modulus;
            }
        }
        for (j, v) in acc.into_iter().enumerate() {
            out[i * h + j] = v as u64;
        }
    }
    out
}

pub fn transpose(values: &[u64], rows: usize, cols: usize) -> Vec<u64> {
    let mut out = vec![0u64; values.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = values[i * cols + j];
        }
    }
    out
}

/// Repeats each per-row value across `cols` columns.
pub fn tile_rows(per_row: &[u64], cols: usize) -> Vec<u64> {
    per_row
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, cols))
        .collect()
}

pub fn row_sums(cfg: &FixedPointConfig, domain: Domain, values: &[u64], cols: usize) -> Vec<u64> {
    values
        .chunks(cols)
        .map(|r| r.iter().fold(0, |acc, &v| cfg.add(domain, acc, v)))
        .collect()
}

pub(crate) fn check_len(what: &str, got: usize, rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 || got != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {got} elements for {rows}×{cols}"
        )));
    }
    Ok(())
}

/// Slot-wise `ct + values` for a ciphertext group.
pub(crate) fn add_plain(
    he: &HeContext,
    cts: &[Ciphertext],
    values: &[u64],
) -> Result<Vec<Ciphertext>> {
    let n = he.slots();
    cts.iter()
        .enumerate()
        .map(|(i, ct)| {
            let chunk = &values[(i * n).min(values.len())..((i + 1) * n).min(values.len())];
            Ok(he.add_pt(ct, &he.plaintext(chunk)?)?)
        })
        .collect()
}

pub(crate) fn sub_plain(
    he: &HeContext,
    cts: &[Ciphertext],
    values: &[u64],
) -> Result<Vec<Ciphertext>> {
    let n = he.slots();
    cts.iter()
        .enumerate()
        .map(|(i, ct)| {
            let chunk = &values[(i * n).min(values.len())..((i + 1) * n).min(values.len())];
            Ok(he.sub_pt(ct, &he.plaintext(chunk)?)?)
        })
        .collect()
}

pub(crate) fn mul_plain(
    he: &HeContext,
    cts: &[Ciphertext],
    values: &[u64],
) -> Result<Vec<Ciphertext>> {
    let n = he.slots();
    cts.iter()
        .enumerate()
        .map(|(i, ct)| {
            let chunk = &values[(i * n).min(values.len())..((i + 1) * n).min(values.len())];
            Ok(he.mul_pt(ct, &he.plaintext(chunk)?)?)
        })
        .collect()
}

pub(crate) fn add_cts(
    he: &HeContext,
    a: &[Ciphertext],
    b: &[Ciphertext],
) -> Result<Vec<Ciphertext>> {
    a.iter().zip(b).map(|(x, y)| Ok(he.add_ct(x, y)?)).collect()
}

pub(crate) fn mul_cts(p: &Party, a: &[Ciphertext], b: &[Ciphertext]) -> Result<Vec<Ciphertext>> {
    let rlk = p.relin_for(&a[0]);
    a.iter()
        .zip(b)
        .map(|(x, y)| Ok(p.he.mul_ct(rlk, x, y)?))
        .collect()
}

pub(crate) fn square_cts(p: &Party, a: &[Ciphertext]) -> Result<Vec<Ciphertext>> {
    let rlk = p.relin_for(&a[0]);
    a.iter().map(|x| Ok(p.he.square(rlk, x)?)).collect()
}

/// Ciphertext group holding `values` as this party's share plus the peer's encrypted share.
pub(crate) fn complete(
    he: &HeContext,
    peer_cts: &[Ciphertext],
    own: &Share,
) -> Result<Vec<Ciphertext>> {
    add_plain(he, peer_cts, &own.values)
}

/// Receives the peer's encrypted share and adds this party's share.
pub(crate) fn recv_complete(
    p: &mut Party,
    step: &str,
    count: usize,
    own: &Share,
) -> Result<Vec<Ciphertext>> {
    let cts = p.recv_cts(step, count)?;
    complete(&p.he, &cts, own)
}
