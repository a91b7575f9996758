//! One transformer encoder block: multi-head attention, residual and
//! LayerNorm, feed-forward with GeLU, residual and LayerNorm.

mod block;
mod oracle;
mod weights;

pub use block::{infer_block, infer_block_shares, BlockOutput, EncodedWeights};
pub use oracle::{attention, gelu, layer_norm, oracle_block, softmax};
pub use weights::{BlockWeights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Block dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockConfig {
    /// Sequence length.
    pub d_s: usize,
    /// Hidden size.
    pub d_m: usize,
    /// Attention heads.
    pub h: usize,
    /// Per-head width.
    pub d_k: usize,
    /// Feed-forward width.
    pub d_f: usize,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            d_s: 128,
            d_m: 768,
            h: 12,
            d_k: 64,
            d_f: 3072,
        }
    }
}

impl BlockConfig {
    pub fn toy() -> Self {
        Self {
            d_s: 8,
            d_m: 16,
            h: 2,
            d_k: 8,
            d_f: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.d_s, self.d_m, self.h, self.d_k, self.d_f];
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero dimension in {self:?}")));
        }
        if self.d_m != self.h * self.d_k {
            return Err(Error::Shape(format!(
                "d_m = {} but {} heads of width {}",
                self.d_m, self.h, self.d_k
            )));
        }
        Ok(())
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for {rows}×{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn at(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Matrix<F>) -> Matrix<F> {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(F::zero(), |acc, l| acc + self.at(i, l) * other.at(l, j))
        })
    }

    pub fn transpose(&self) -> Matrix<F> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    pub fn add(&self, other: &Matrix<F>) -> Matrix<F> {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shapes differ"
        );
        Matrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j) + other.at(i, j))
    }

    /// Adds `bias` to every row.
    pub fn add_row(&self, bias: &[F]) -> Matrix<F> {
        assert_eq!(self.cols, bias.len(), "bias width differs");
        Matrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j) + bias[j])
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Columns `start..start + width`.
    pub fn columns(&self, start: usize, width: usize) -> Matrix<F> {
        Matrix::from_fn(self.rows, width, |i, j| self.at(i, start + j))
    }

    /// Side-by-side concatenation.
    pub fn hconcat(parts: &[Matrix<F>]) -> Matrix<F> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Matrix { rows, cols, data }
    }
}
