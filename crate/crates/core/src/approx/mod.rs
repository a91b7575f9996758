//! Piecewise polynomial replacements for smooth activations.
//!
//! A table splits the real line at sorted boundaries into half-open pieces
//! `[lo, hi)`, each a polynomial in ascending-degree coefficients. Constant
//! and `x + ε` tails are degree-0 and degree-1 pieces. Odd and
//! complement-symmetric tables store only the half line `x >= 0`.

mod fit;
mod tables;

pub use fit::{find_boundaries, fit_segments, least_squares, DerivativeOrder, FitSpec};
pub use tables::{
    gelu, gelu_exact, mish, mish_exact, sigmoid, sigmoid_exact, table_by_name, tanh, tanh_exact,
    target_by_name, TABLE_NAMES,
};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{FixEncoded, FixedPointConfig};

/// Guard bits carried by fixed-point Horner evaluation.
const GUARD_BITS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    None,
    /// `f(-x) = -f(x)`.
    Odd,
    /// `f(-x) = 1 - f(x)`.
    Complement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly<F> {
    pub name: String,
    pub symmetry: Symmetry,
    pub boundaries: Vec<F>,
    /// One coefficient vector per piece, lowest degree first.
    pub segments: Vec<Vec<F>>,
}

/// Horner evaluation of ascending-degree coefficients.
pub fn horner<F: Float>(coefs: &[F], x: F) -> F {
    coefs.iter().rev().fold(F::zero(), |acc, &c| acc * x + c)
}

/// Coefficients of `q(u) = p(u + c)`.
pub fn recenter<F: Float>(coefs: &[F], c: F) -> Vec<F> {
    let mut out = vec![F::zero(); coefs.len()];
    for (i, &a) in coefs.iter().enumerate() {
        let mut binom = F::one();
        let mut pow = F::one();
        for k in (0..=i).rev() {
            out[k] = out[k] + a * binom * pow;
            binom = binom * F::from(k).unwrap() / F::from(i - k + 1).unwrap();
            pow = pow * c;
        }
    }
    out
}

impl<F: Float> PiecewisePoly<F> {
    pub fn new(
        name: impl Into<String>,
        symmetry: Symmetry,
        boundaries: Vec<F>,
        segments: Vec<Vec<F>>,
    ) -> Result<Self> {
        let pp = Self {
            name: name.into(),
            symmetry,
            boundaries,
            segments,
        };
        pp.validate()?;
        Ok(pp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.len() != self.boundaries.len() + 1 {
            return Err(Error::Parse(format!(
                "{}: {} pieces for {} boundaries",
                self.name,
                self.segments.len(),
                self.boundaries.len()
            )));
        }
        if self.boundaries.iter().any(|b| !b.is_finite())
            || self.boundaries.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Parse(format!(
                "{}: boundaries not strictly increasing",
                self.name
            )));
        }
        if self
            .segments
            .iter()
            .any(|s| s.is_empty() || s.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::Parse(format!(
                "{}: empty or non-finite piece",
                self.name
            )));
        }
        if self.symmetry != Symmetry::None
            && self.boundaries.first().is_some_and(|&b| b <= F::zero())
        {
            return Err(Error::Parse(format!(
                "{}: symmetric table with a boundary at or below 0",
                self.name
            )));
        }
        Ok(())
    }

    pub fn max_degree(&self) -> usize {
        self.segments.iter().map(|s| s.len() - 1).max().unwrap_or(0)
    }

    /// Index of the piece owning `x`; boundaries belong to the right piece.
    pub fn segment_index(&self, x: F) -> usize {
        self.boundaries.partition_point(|&b| b <= x)
    }

    fn eval_direct(&self, x: F) -> F {
        horner(&self.segments[self.segment_index(x)], x)
    }

    pub fn eval(&self, x: F) -> F {
        match self.symmetry {
            Symmetry::Odd if x < F::zero() => -self.eval_direct(-x),
            Symmetry::Complement if x < F::zero() => F::one() - self.eval_direct(-x),
            _ => self.eval_direct(x),
        }
    }

    /// `|left − right|` at each boundary, plus the jump at 0 for symmetric tables.
    pub fn continuity(&self) -> Vec<(F, F)> {
        let mut out: Vec<(F, F)> = self
            .boundaries
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                (
                    b,
                    (horner(&self.segments[i], b) - horner(&self.segments[i + 1], b)).abs(),
                )
            })
            .collect();
        let at_zero = self.eval_direct(F::zero());
        match self.symmetry {
            Symmetry::Odd => out.insert(0, (F::zero(), (at_zero + at_zero).abs())),
            Symmetry::Complement => {
                out.insert(0, (F::zero(), (F::one() - at_zero - at_zero).abs()))
            }
            Symmetry::None => {}
        }
        out
    }

    /// Largest boundary jump.
    pub fn max_discontinuity(&self) -> F {
        self.continuity()
            .into_iter()
            .fold(F::zero(), |m, (_, j)| m.max(j))
    }
}

impl PiecewisePoly<f64> {
    /// Fixed-point evaluation with integer boundary tests and `i128` Horner steps.
    pub fn eval_fixed(&self, x: FixEncoded, cfg: &FixedPointConfig) -> FixEncoded {
        let scale = x.scale;
        let v = cfg.lift(x.domain, x.value);
        let one = 1i128 << scale;
        let y = match self.symmetry {
            Symmetry::Odd if v < 0 => -self.eval_fixed_direct(-v, scale),
            Symmetry::Complement if v < 0 => one - self.eval_fixed_direct(-v, scale),
            _ => self.eval_fixed_direct(v, scale),
        };
        FixEncoded {
            value: cfg.reduce(x.domain, y),
            domain: x.domain,
            scale,
        }
    }

    fn eval_fixed_direct(&self, v: i128, scale: u32) -> i128 {
        let unit = (scale as f64).exp2();
        let idx = self
            .boundaries
            .partition_point(|&b| v >= (b * unit).ceil() as i128);
        let coef_unit = ((scale + GUARD_BITS) as f64).exp2();
        let mut acc = 0i128;
        for &c in self.segments[idx].iter().rev() {
            acc = round_shift(acc * v, scale) + (c * coef_unit).round() as i128;
        }
        round_shift(acc, GUARD_BITS)
    }

    /// Structured text form: name, symmetry, boundaries and per-piece coefficients.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("table serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let pp: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        pp.validate()?;
        Ok(pp)
    }
}

fn round_shift(v: i128, shift: u32) -> i128 {
    if shift == 0 {
        v
    } else {
        (v + (1i128 << (shift - 1))) >> shift
    }
}

/// Mean of `|pp(x) − target(x)|` over `n` evenly spaced points of `[lo, hi]`.
pub fn mae<F: Float>(pp: &PiecewisePoly<F>, target: impl Fn(F) -> F, lo: F, hi: F, n: usize) -> F {
    mean_abs_diff(|x| pp.eval(x), target, lo, hi, n)
}

/// Mean of `|f(x) − g(x)|` over `n` evenly spaced points of `[lo, hi]`.
pub fn mean_abs_diff<F: Float>(
    f: impl Fn(F) -> F,
    g: impl Fn(F) -> F,
    lo: F,
    hi: F,
    n: usize,
) -> F {
    assert!(n >= 2, "mae needs at least two points");
    let step = (hi - lo) / F::from(n - 1).unwrap();
    let total = (0..n).fold(F::zero(), |acc, i| {
        let x = lo + step * F::from(i).unwrap();
        acc + (f(x) - g(x)).abs()
    });
    total / F::from(n).unwrap()
}
