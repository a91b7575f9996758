//! Rotation-free matrix product and its fully shared variant.
//!
//! Party A's matrix is expanded so that slot `i·d_h + j` of the `l`-th
//! ciphertext holds `A[i][l]`; party B's plaintext puts `B[l][j]` in the same
//! slot. Summing the `d_n` slot-wise products yields `C[i][j]` in place, so
//! no slot ever moves.

use crate::error::{Error, Result};
use crate::fixedpoint::Domain;
use crate::party::Party;
use crate::sharing::{random_vector, Share};
use crate::Role;

use super::{check_len, matmul_local, transpose, ProtocolOutput};

/// `d_m × d_n` times `d_n × d_h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixShape {
    pub d_m: usize,
    pub d_n: usize,
    pub d_h: usize,
}

impl MatrixShape {
    pub fn new(d_m: usize, d_n: usize, d_h: usize) -> Result<Self> {
        if d_m == 0 || d_n == 0 || d_h == 0 {
            return Err(Error::ShapeMismatch(format!(
                "empty shape {d_m}×{d_n}×{d_h}"
            )));
        }
        Ok(Self { d_m, d_n, d_h })
    }

    /// Parses `MxNxK`.
    pub fn parse(text: &str) -> Result<Self> {
        let dims: Vec<usize> = text
            .split(['x', 'X', '×'])
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad shape {text:?}")))?;
        match dims.as_slice() {
            [m, n, h] => Self::new(*m, *n, *h),
            _ => Err(Error::Config(format!(
                "shape {text:?} needs three dimensions"
            ))),
        }
    }
}

/// Row-blocked slot layout of a `d_m × d_h` output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PackedLayout {
    pub rows: usize,
    pub cols: usize,
    pub rows_per_block: usize,
    pub blocks: usize,
}

impl PackedLayout {
    pub fn new(rows: usize, cols: usize, slots: usize) -> Result<Self> {
        if cols > slots {
            return Err(Error::CapacityExceeded {
                needed: cols,
                available: slots,
            });
        }
        let rows_per_block = slots / cols;
        Ok(Self {
            rows,
            cols,
            rows_per_block,
            blocks: rows.div_ceil(rows_per_block),
        })
    }

    pub fn block_rows(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.rows_per_block;
        start..(start + self.rows_per_block).min(self.rows)
    }

    /// Splits a row-major `rows × cols` matrix into per-block slot vectors.
    pub fn flatten(&self, m: &[u64]) -> Vec<Vec<u64>> {
        (0..self.blocks)
            .map(|b| {
                let r = self.block_rows(b);
                m[r.start * self.cols..r.end * self.cols].to_vec()
            })
            .collect()
    }

    pub fn unflatten(&self, blocks: &[Vec<u64>]) -> Vec<u64> {
        blocks.iter().flatten().copied().collect()
    }

    /// Slot vector of block `b` holding `a[i][l]` at every `(i, j)`.
    pub fn expand_column(&self, a: &[u64], inner: usize, l: usize, b: usize) -> Vec<u64> {
        self.block_rows(b)
            .flat_map(|i| std::iter::repeat_n(a[i * inner + l], self.cols))
            .collect()
    }

    /// Slot vector holding row `l` of `b` tiled over a full block.
    pub fn tile_row(&self, bm: &[u64], l: usize) -> Vec<u64> {
        let row = &bm[l * self.cols..(l + 1) * self.cols];
        (0..self.rows_per_block)
            .flat_map(|_| row.iter().copied())
            .collect()
    }
}

/// Ciphertexts exchanged by one [`pi_matmul`] call: `d_n` per block from A, one per block from B.
pub fn matmul_ciphertexts(shape: MatrixShape, slots: usize) -> Result<usize> {
    let layout = PackedLayout::new(shape.d_m, shape.d_h, slots)?;
    Ok((shape.d_n + 1) * layout.blocks)
}

/// Party A supplies the `d_m × d_n` matrix, party B the `d_n × d_h` matrix, both as field elements.
/// Outputs field shares of the product: A holds the decrypted masked product, B holds the mask.
pub fn pi_matmul(p: &mut Party, matrix: &[u64], shape: MatrixShape) -> Result<ProtocolOutput> {
    let scale = 2 * p.cfg.s;
    let (share, cost) = p.scoped("matmul", |p| {
        let layout = PackedLayout::new(shape.d_m, shape.d_h, p.he.slots())?;
        let MatrixShape { d_m, d_n, d_h } = shape;
        match p.role {
            Role::A => {
                check_len("matmul A", matrix.len(), d_m, d_n)?;
                let mut cts = Vec::with_capacity(d_n * layout.blocks);
                for b in 0..layout.blocks {
                    for l in 0..d_n {
                        cts.extend(p.encrypt(&layout.expand_column(matrix, d_n, l, b))?);
                    }
                }
                p.send_cts("x_enc", &cts)?;
                let back = p.recv_cts("c_mask", layout.blocks)?;
                let mut blocks = Vec::with_capacity(layout.blocks);
                for (b, ct) in back.iter().enumerate() {
                    let len = layout.block_rows(b).len() * d_h;
                    blocks.push(p.decrypt(std::slice::from_ref(ct), len)?);
                }
                Ok(Share::new(
                    Domain::Field,
                    Role::A,
                    layout.unflatten(&blocks),
                ))
            }
            Role::B => {
                check_len("matmul B", matrix.len(), d_n, d_h)?;
                let cts = p.recv_cts("x_enc", d_n * layout.blocks)?;
                let tiles = (0..d_n)
                    .map(|l| Ok(p.he.plaintext(&layout.tile_row(matrix, l))?))
                    .collect::<Result<Vec<_>>>()?;
                let mut out = Vec::with_capacity(layout.blocks);
                let mut masks = Vec::with_capacity(layout.blocks);
                for b in 0..layout.blocks {
                    let mut acc = p.he.mul_pt(&cts[b * d_n], &tiles[0])?;
                    for l in 1..d_n {
                        acc =
                            p.he.add_ct(&acc, &p.he.mul_pt(&cts[b * d_n + l], &tiles[l])?)?;
                    }
                    let len = layout.block_rows(b).len() * d_h;
                    let r = random_vector(Domain::Field, len, &p.cfg, &mut p.rng);
                    out.push(p.he.sub_pt(&acc, &p.he.plaintext(&r)?)?);
                    masks.push(r);
                }
                p.send_cts("c_mask", &out)?;
                Ok(Share::new(Domain::Field, Role::B, layout.unflatten(&masks)))
            }
        }
    })?;
    Ok(ProtocolOutput {
        share,
        rows: shape.d_m,
        cols: shape.d_h,
        scale,
        cost,
    })
}

/// Field shares of `Q·Kᵀ` from field shares of `Q` (`d × e`) and `K` (`m × e`).
pub fn pi_matmul_shared(
    p: &mut Party,
    q: &Share,
    k: &Share,
    d: usize,
    m: usize,
    e: usize,
) -> Result<ProtocolOutput> {
    if q.domain != Domain::Field || k.domain != Domain::Field {
        return Err(Error::DomainMismatch(
            "matmul_shared takes field shares".into(),
        ));
    }
    check_len("matmul_shared Q", q.len(), d, e)?;
    check_len("matmul_shared K", k.len(), m, e)?;
    let scale = 2 * p.cfg.s;
    let (share, cost) = p.scoped("matmul_shared", |p| {
        let cfg = p.cfg;
        let local = matmul_local(
            &cfg,
            Domain::Field,
            &q.values,
            &transpose(&k.values, m, e),
            d,
            e,
            m,
        );
        let (first, second) = match p.role {
            Role::A => (q.values.clone(), k.values.clone()),
            Role::B => (transpose(&k.values, m, e), transpose(&q.values, d, e)),
        };
        let cross = pi_matmul(p, &first, MatrixShape::new(d, e, m)?)?.share;
        let swapped = pi_matmul(p, &second, MatrixShape::new(m, e, d)?)?.share;
        let swapped = Share::new(Domain::Field, p.role, transpose(&swapped.values, m, d));
        let own = match p.role {
            Role::A => {
                let l = p.recv_elems("l_mask", Domain::Field, d * m)?;
                Share::new(Domain::Field, Role::A, local)
                    .add(&Share::new(Domain::Field, Role::A, l), &cfg)?
            }
            Role::B => {
                let e_mask = random_vector(Domain::Field, d * m, &cfg, &mut p.rng);
                let l: Vec<u64> = local
                    .iter()
                    .zip(&e_mask)
                    .map(|(&x, &r)| cfg.sub(Domain::Field, x, r))
                    .collect();
                p.send_elems("l_mask", Domain::Field, &l)?;
                Share::new(Domain::Field, Role::B, e_mask)
            }
        };
        own.add(&cross, &cfg)?.add(&swapped, &cfg)
    })?;
    Ok(ProtocolOutput {
        share,
        rows: d,
        cols: m,
        scale,
        cost,
    })
}
