//! Block weights and their binary container.
//!
//! Layout, all integers little-endian: magic, `u32` version, five `u32`
//! dimensions (`d_s d_m h d_k d_f`), `u32` tensor count, then per tensor a
//! `u16` name length, the UTF-8 name, `u32` rows, `u32` cols and
//! `rows·cols` row-major `f64` values.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::Float;
use rand::Rng;

use super::{BlockConfig, Matrix};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"PTWB";
pub const WEIGHTS_VERSION: u32 = 1;

/// Real-valued weights of one block. Vectors are stored as `1 × n` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockWeights<F> {
    pub config: BlockConfig,
    pub w_q: Vec<Matrix<F>>,
    pub w_k: Vec<Matrix<F>>,
    pub w_v: Vec<Matrix<F>>,
    pub w_o: Matrix<F>,
    pub w_f1: Matrix<F>,
    pub b_f1: Vec<F>,
    pub w_f2: Matrix<F>,
    pub b_f2: Vec<F>,
    pub ln1_gamma: Vec<F>,
    pub ln1_beta: Vec<F>,
    pub ln2_gamma: Vec<F>,
    pub ln2_beta: Vec<F>,
}

fn cast<F: Float>(x: f64) -> F {
    F::from(x).expect("f64 converts to the scalar type")
}

fn uniform<F: Float, R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    bound: f64,
) -> Matrix<F> {
    Matrix::from_fn(rows, cols, |_, _| cast(rng.gen_range(-bound..bound)))
}

fn vector<F: Float, R: Rng + ?Sized>(rng: &mut R, n: usize, center: f64, spread: f64) -> Vec<F> {
    (0..n)
        .map(|_| cast(center + rng.gen_range(-spread..spread)))
        .collect()
}

impl<F: Float> BlockWeights<F> {
    /// Uniform weights with unit-variance projections, gains near 1 and small offsets.
    pub fn random<R: Rng + ?Sized>(config: BlockConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let BlockConfig {
            d_m, h, d_k, d_f, ..
        } = config;
        let bound = |fan_in: usize| (3.0 / fan_in as f64).sqrt();
        let heads = |rng: &mut R| {
            (0..h)
                .map(|_| uniform(rng, d_m, d_k, bound(d_m)))
                .collect::<Vec<_>>()
        };
        let w_q = heads(rng);
        let w_k = heads(rng);
        let w_v = heads(rng);
        Ok(Self {
            config,
            w_q,
            w_k,
            w_v,
            w_o: uniform(rng, d_m, d_m, bound(d_m)),
            w_f1: uniform(rng, d_m, d_f, bound(d_m)),
            b_f1: vector(rng, d_f, 0.0, 0.1),
            w_f2: uniform(rng, d_f, d_m, bound(d_f)),
            b_f2: vector(rng, d_m, 0.0, 0.1),
            ln1_gamma: vector(rng, d_m, 1.0, 0.1),
            ln1_beta: vector(rng, d_m, 0.0, 0.1),
            ln2_gamma: vector(rng, d_m, 1.0, 0.1),
            ln2_beta: vector(rng, d_m, 0.0, 0.1),
        })
    }

    fn tensors(&self) -> Vec<(String, Matrix<F>)> {
        let row = |v: &[F]| Matrix {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        };
        let mut out = Vec::new();
        for (kind, list) in [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v)] {
            for (i, m) in list.iter().enumerate() {
                out.push((format!("{kind}.{i}"), m.clone()));
            }
        }
        out.push(("w_o".into(), self.w_o.clone()));
        out.push(("w_f1".into(), self.w_f1.clone()));
        out.push(("b_f1".into(), row(&self.b_f1)));
        out.push(("w_f2".into(), self.w_f2.clone()));
        out.push(("b_f2".into(), row(&self.b_f2)));
        out.push(("ln1.gamma".into(), row(&self.ln1_gamma)));
        out.push(("ln1.beta".into(), row(&self.ln1_beta)));
        out.push(("ln2.gamma".into(), row(&self.ln2_gamma)));
        out.push(("ln2.beta".into(), row(&self.ln2_beta)));
        out
    }

    fn expected_shapes(config: &BlockConfig) -> Vec<(String, usize, usize)> {
        let BlockConfig {
            d_m, h, d_k, d_f, ..
        } = *config;
        let mut out = Vec::new();
        for kind in ["w_q", "w_k", "w_v"] {
            for i in 0..h {
                out.push((format!("{kind}.{i}"), d_m, d_k));
            }
        }
        out.push(("w_o".into(), d_m, d_m));
        out.push(("w_f1".into(), d_m, d_f));
        out.push(("b_f1".into(), 1, d_f));
        out.push(("w_f2".into(), d_f, d_m));
        out.push(("b_f2".into(), 1, d_m));
        for name in ["ln1.gamma", "ln1.beta", "ln2.gamma", "ln2.beta"] {
            out.push((name.into(), 1, d_m));
        }
        out
    }

    /// Checks every tensor against the block dimensions.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let have = self.tensors();
        let want = Self::expected_shapes(&self.config);
        if have.len() != want.len() {
            return Err(Error::Shape(format!(
                "{} tensors, expected {}",
                have.len(),
                want.len()
            )));
        }
        for ((name, m), (_, rows, cols)) in have.iter().zip(&want) {
            if (m.rows, m.cols) != (*rows, *cols) || m.data.len() != rows * cols {
                return Err(Error::Shape(format!(
                    "{name} is {}×{}, expected {rows}×{cols}",
                    m.rows, m.cols
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let c = &self.config;
        let tensors = self.tensors();
        let mut out = Vec::new();
        out.extend_from_slice(&WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        for d in [c.d_s, c.d_m, c.h, c.d_k, c.d_f] {
            out.extend_from_slice(&dim(d)?.to_le_bytes());
        }
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, m) in &tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&dim(m.rows)?.to_le_bytes());
            out.extend_from_slice(&dim(m.cols)?.to_le_bytes());
            for v in &m.data {
                let v = v
                    .to_f64()
                    .ok_or_else(|| Error::Parse("weight does not fit f64".into()))?;
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != WEIGHTS_MAGIC {
            return Err(Error::Parse("not a weight container".into()));
        }
        let version = r.u32()?;
        if version != WEIGHTS_VERSION {
            return Err(Error::Parse(format!(
                "unsupported container version {version}"
            )));
        }
        let mut d = [0usize; 5];
        for v in &mut d {
            *v = r.u32()? as usize;
        }
        let config = BlockConfig {
            d_s: d[0],
            d_m: d[1],
            h: d[2],
            d_k: d[3],
            d_f: d[4],
        };
        config.validate()?;
        let count = r.u32()? as usize;
        let mut found: BTreeMap<String, Matrix<F>> = BTreeMap::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Parse("tensor name is not UTF-8".into()))?
                .to_string();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::Parse(format!("tensor {name} runs past the end")))?;
            let data = (0..n)
                .map(|_| r.f64().map(cast))
                .collect::<Result<Vec<F>>>()?;
            if found
                .insert(name.clone(), Matrix { rows, cols, data })
                .is_some()
            {
                return Err(Error::Parse(format!("duplicate tensor {name}")));
            }
        }
        if r.remaining() != 0 {
            return Err(Error::Parse(format!("{} trailing bytes", r.remaining())));
        }
        let mut take = |name: &str, rows: usize, cols: usize| -> Result<Matrix<F>> {
            let m = found
                .remove(name)
                .ok_or_else(|| Error::Parse(format!("missing tensor {name}")))?;
            if (m.rows, m.cols) != (rows, cols) {
                return Err(Error::Shape(format!(
                    "{name} is {}×{}, expected {rows}×{cols}",
                    m.rows, m.cols
                )));
            }
            Ok(m)
        };
        let BlockConfig {
            d_m, h, d_k, d_f, ..
        } = config;
        let mut heads = |kind: &str| {
            (0..h)
                .map(|i| take(&format!("{kind}.{i}"), d_m, d_k))
                .collect::<Result<Vec<_>>>()
        };
        let w_q = heads("w_q")?;
        let w_k = heads("w_k")?;
        let w_v = heads("w_v")?;
        let weights = Self {
            config,
            w_q,
            w_k,
            w_v,
            w_o: take("w_o", d_m, d_m)?,
            w_f1: take("w_f1", d_m, d_f)?,
            b_f1: take("b_f1", 1, d_f)?.data,
            w_f2: take("w_f2", d_f, d_m)?,
            b_f2: take("b_f2", 1, d_m)?.data,
            ln1_gamma: take("ln1.gamma", 1, d_m)?.data,
            ln1_beta: take("ln1.beta", 1, d_m)?.data,
            ln2_gamma: take("ln2.gamma", 1, d_m)?.data,
            ln2_beta: take("ln2.beta", 1, d_m)?.data,
        };
        if let Some(extra) = found.keys().next() {
            return Err(Error::Parse(format!("unexpected tensor {extra}")));
        }
        Ok(weights)
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn dim(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::Shape(format!("dimension {d} exceeds u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Parse(format!("truncated at byte {}", self.pos)));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("two bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("four bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("eight bytes"),
        ))
    }
}
