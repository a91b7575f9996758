//! Two-party block driver.
//!
//! Every stage runs in its own label scope, so the block report is the
//! field-wise sum of the stage reports.

use num_traits::Float;

use super::{BlockConfig, BlockWeights, Matrix};
use crate::channel::CostReport;
use crate::error::{Error, Result};
use crate::fixedpoint::{
    encode_at, encode_slice, field_to_ring, ring_to_field, truncate_shares, Domain,
    FixedPointConfig,
};
use crate::party::Party;
use crate::protocols::{
    matmul_local, pi_gelu_shares, pi_ln, pi_matmul, pi_matmul_shared, pi_softmax, transpose,
    GeluPlan, LnParams, MatrixShape,
};
use crate::sharing::Share;
use crate::Role;

/// Party B's weights as field elements: matrices and gains at scale `s`, biases at `2s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedWeights {
    pub config: BlockConfig,
    /// Per head, `[W_Q | W_K | W_V]` as one `d_m × 3·d_k` matrix.
    pub qkv: Vec<Vec<u64>>,
    pub w_o: Vec<u64>,
    pub w_f1: Vec<u64>,
    pub b_f1: Vec<u64>,
    pub w_f2: Vec<u64>,
    pub b_f2: Vec<u64>,
    pub ln1: LnParams,
    pub ln2: LnParams,
}

impl EncodedWeights {
    pub fn new<F: Float>(w: &BlockWeights<F>, cfg: &FixedPointConfig) -> Result<Self> {
        w.validate()?;
        let s = cfg.s;
        let enc = |xs: &[F], scale: u32| encode_slice(xs, scale, cfg, Domain::Field);
        let qkv = (0..w.config.h)
            .map(|i| {
                enc(
                    &Matrix::hconcat(&[w.w_q[i].clone(), w.w_k[i].clone(), w.w_v[i].clone()]).data,
                    s,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: w.config,
            qkv,
            w_o: enc(&w.w_o.data, s)?,
            w_f1: enc(&w.w_f1.data, s)?,
            b_f1: enc(&w.b_f1, 2 * s)?,
            w_f2: enc(&w.w_f2.data, s)?,
            b_f2: enc(&w.b_f2, 2 * s)?,
            ln1: LnParams::new(enc(&w.ln1_gamma, s)?, enc(&w.ln1_beta, s)?)?,
            ln2: LnParams::new(enc(&w.ln2_gamma, s)?, enc(&w.ln2_beta, s)?)?,
        })
    }
}

/// One party's share of the block output plus per-stage costs.
#[derive(Clone, Debug)]
pub struct BlockOutput {
    /// Ring shares at scale `s`, `d_s × d_m` row-major.
    pub share: Share,
    pub rows: usize,
    pub cols: usize,
    pub cost: CostReport,
    pub stages: Vec<(String, CostReport)>,
}

impl BlockOutput {
    pub fn stage_total(&self) -> CostReport {
        self.stages
            .iter()
            .fold(CostReport::default(), |acc, (_, c)| acc.merge(c))
    }
}

/// Party A passes its real input, party B its weights.
pub fn infer_block(
    p: &mut Party,
    block: &BlockConfig,
    x: Option<&Matrix<f64>>,
    weights: Option<&EncodedWeights>,
) -> Result<BlockOutput> {
    block.validate()?;
    let len = block.d_s * block.d_m;
    let share = match (p.role, x) {
        (Role::A, Some(x)) => {
            if (x.rows, x.cols) != (block.d_s, block.d_m) {
                return Err(Error::Shape(format!(
                    "input is {}×{}, block expects {}×{}",
                    x.rows, x.cols, block.d_s, block.d_m
                )));
            }
            Share::new(
                Domain::Ring,
                Role::A,
                encode_slice(&x.data, p.cfg.s, &p.cfg, Domain::Ring)?,
            )
        }
        (Role::A, None) => return Err(Error::Config("party A must supply the input".into())),
        (Role::B, _) => Share::zeros(Domain::Ring, Role::B, len),
    };
    infer_block_shares(p, block, &share, weights)
}

/// Ring shares of the input at scale `s` in, ring shares of the block output out.
pub fn infer_block_shares(
    p: &mut Party,
    block: &BlockConfig,
    x: &Share,
    weights: Option<&EncodedWeights>,
) -> Result<BlockOutput> {
    block.validate()?;
    let BlockConfig {
        d_s,
        d_m,
        h,
        d_k,
        d_f,
    } = *block;
    if x.domain != Domain::Ring || x.len() != d_s * d_m {
        return Err(Error::Shape(format!(
            "block input needs {} ring shares",
            d_s * d_m
        )));
    }
    match (p.role, weights) {
        (Role::B, None) => return Err(Error::Config("party B must supply the weights".into())),
        (Role::B, Some(w)) => {
            let c = w.config;
            if (c.d_m, c.h, c.d_k, c.d_f) != (d_m, h, d_k, d_f) {
                return Err(Error::Shape(format!(
                    "weights for {c:?} used with {block:?}"
                )));
            }
        }
        _ => {}
    }
    let mut stages = Vec::new();
    let (share, cost) = p.scoped("block", |p| {
        let s = p.cfg.s;
        let x_field = stage(p, &mut stages, "input", |p| ring_to_field(p, x))?;

        let mut heads = Vec::with_capacity(h);
        for i in 0..h {
            let (q, k, v) = stage(p, &mut stages, &format!("head{i}/qkv"), |p| {
                let w = weights.map(|w| w.qkv[i].as_slice());
                let qkv = linear(p, &x_field, d_s, d_m, 3 * d_k, w)?;
                let qkv = rescale(p, &qkv)?;
                let cols = |start: usize| {
                    qkv.gather(
                        (0..d_s)
                            .flat_map(move |r| (start..start + d_k).map(move |j| r * 3 * d_k + j)),
                    )
                };
                let inv_sqrt =
                    encode_at((d_k as f64).sqrt().recip(), s, &p.cfg, Domain::Ring)?.value;
                let q = truncate_shares(p, &cols(0).mul_scalar(inv_sqrt, &p.cfg), s, true)?;
                Ok((
                    ring_to_field(p, &q)?,
                    ring_to_field(p, &cols(d_k))?,
                    ring_to_field(p, &cols(2 * d_k))?,
                ))
            })?;
            let scores = stage(p, &mut stages, &format!("head{i}/scores"), |p| {
                let y = pi_matmul_shared(p, &q, &k, d_s, d_s, d_k)?.share;
                rescale(p, &y)
            })?;
            let probs = stage(p, &mut stages, &format!("head{i}/softmax"), |p| {
                let y = pi_softmax(p, &scores, d_s, d_s)?.share;
                ring_to_field(p, &y)
            })?;
            let context = stage(p, &mut stages, &format!("head{i}/context"), |p| {
                let vt = Share::new(Domain::Field, p.role, transpose(&v.values, d_s, d_k));
                let y = pi_matmul_shared(p, &probs, &vt, d_s, d_k, d_s)?.share;
                rescale(p, &y)
            })?;
            heads.push(context);
        }

        let r1 = stage(p, &mut stages, "attn_out", |p| {
            let mut joined = Vec::with_capacity(d_s * d_m);
            for r in 0..d_s {
                for head in &heads {
                    joined.extend_from_slice(&head.values[r * d_k..(r + 1) * d_k]);
                }
            }
            let joined = ring_to_field(p, &Share::new(Domain::Ring, p.role, joined))?;
            let out = linear(p, &joined, d_s, d_m, d_m, weights.map(|w| w.w_o.as_slice()))?;
            let out = rescale(p, &out)?;
            out.add(x, &p.cfg)
        })?;
        let ln1 = stage(p, &mut stages, "ln1", |p| {
            Ok(pi_ln(p, &r1, d_s, d_m, weights.map(|w| &w.ln1))?.share)
        })?;

        let hidden = stage(p, &mut stages, "ffn1", |p| {
            let input = ring_to_field(p, &ln1)?;
            let pre = linear(p, &input, d_s, d_m, d_f, weights.map(|w| w.w_f1.as_slice()))?;
            let pre = add_own(p, &pre, weights.map(|w| tile_rows_of(&w.b_f1, d_s)));
            let pre = rescale(p, &pre)?;
            ring_to_field(p, &pre)
        })?;
        let activated = stage(p, &mut stages, "gelu", |p| {
            let plan = GeluPlan::standard(&p.cfg);
            Ok(pi_gelu_shares(p, &plan, &hidden)?.share)
        })?;
        let r2 = stage(p, &mut stages, "ffn2", |p| {
            let out = linear(
                p,
                &activated,
                d_s,
                d_f,
                d_m,
                weights.map(|w| w.w_f2.as_slice()),
            )?;
            let out = add_own(p, &out, weights.map(|w| tile_rows_of(&w.b_f2, d_s)));
            rescale(p, &out)?.add(&ln1, &p.cfg)
        })?;
        stage(p, &mut stages, "ln2", |p| {
            Ok(pi_ln(p, &r2, d_s, d_m, weights.map(|w| &w.ln2))?.share)
        })
    })?;
    Ok(BlockOutput {
        share,
        rows: d_s,
        cols: d_m,
        cost,
        stages,
    })
}

fn stage<T>(
    p: &mut Party,
    stages: &mut Vec<(String, CostReport)>,
    name: &str,
    f: impl FnOnce(&mut Party) -> Result<T>,
) -> Result<T> {
    let (out, cost) = p.scoped(name, f).map_err(|e| e.at(name))?;
    stages.push((name.to_string(), cost));
    Ok(out)
}

/// Field shares of `x·W` at scale `2s` from field shares of `x` at `s`.
/// A runs the product on its share; B adds its own share's product locally.
fn linear(
    p: &mut Party,
    x: &Share,
    rows: usize,
    inner: usize,
    cols: usize,
    w: Option<&[u64]>,
) -> Result<Share> {
    let shape = MatrixShape::new(rows, inner, cols)?;
    match (p.role, w) {
        (Role::A, _) => Ok(pi_matmul(p, &x.values, shape)?.share),
        (Role::B, Some(w)) => {
            let masked = pi_matmul(p, w, shape)?.share;
            let local = matmul_local(&p.cfg, Domain::Field, &x.values, w, rows, inner, cols);
            masked.add(&Share::new(Domain::Field, Role::B, local), &p.cfg)
        }
        (Role::B, None) => Err(Error::Config("party B must supply the weights".into())),
    }
}

/// Field shares at `2s` to ring shares at `s`.
fn rescale(p: &mut Party, x: &Share) -> Result<Share> {
    let ring = field_to_ring(p, x, true)?;
    truncate_shares(p, &ring, p.cfg.s, true)
}

/// Adds a vector known only to this party to its own share.
fn add_own(p: &Party, x: &Share, values: Option<Vec<u64>>) -> Share {
    match values {
        Some(v) => Share::new(
            x.domain,
            x.party,
            x.values
                .iter()
                .zip(&v)
                .map(|(&a, &b)| p.cfg.add(x.domain, a, b))
                .collect(),
        ),
        None => x.clone(),
    }
}

fn tile_rows_of(row: &[u64], rows: usize) -> Vec<u64> {
    row.repeat(rows)
}
