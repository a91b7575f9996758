//! Boundary search on derivative zeros and per-piece least-squares fits.

use num_traits::Float;

use super::tables::{
    gelu_exact, gelu_second, gelu_third, mish_exact, mish_first, sigmoid_exact, sigmoid_second,
    sigmoid_third, tanh_exact, tanh_second, tanh_third,
};
use super::{PiecewisePoly, Symmetry};
use crate::error::{Error, Result};

const SCAN_POINTS: usize = 10_000;
const ROOT_TOLERANCE: f64 = 1e-10;
const DIFF_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeOrder {
    Second,
    Third,
}

/// Everything the fitter needs about one target.
#[derive(Clone, Debug)]
pub struct FitSpec<F> {
    pub name: String,
    pub target: fn(F) -> F,
    pub first: Option<fn(F) -> F>,
    pub second: Option<fn(F) -> F>,
    pub third: Option<fn(F) -> F>,
    pub order: DerivativeOrder,
    /// Outer boundaries go where both the second and third derivatives fall below this.
    pub flatness: Option<F>,
    /// Degree of each fitted piece, left to right; the last entry repeats.
    pub degrees: Vec<usize>,
    /// Sample points per fitted piece.
    pub samples: usize,
    pub window: (F, F),
    pub symmetry: Symmetry,
    pub left_tail: Option<Vec<F>>,
    pub right_tail: Option<Vec<F>>,
}

fn c<F: Float>(x: f64) -> F {
    F::from(x).unwrap()
}

impl<F: Float> FitSpec<F> {
    /// Defaults: second-derivative search on `[-8, 8]`, threshold `1e-5`, degree 4, `10^4` samples.
    pub fn new(name: impl Into<String>, target: fn(F) -> F) -> Self {
        Self {
            name: name.into(),
            target,
            first: None,
            second: None,
            third: None,
            order: DerivativeOrder::Second,
            flatness: Some(c(1e-5)),
            degrees: vec![4],
            samples: 10_000,
            window: (c(-8.0), c(8.0)),
            symmetry: Symmetry::None,
            left_tail: None,
            right_tail: None,
        }
    }

    pub fn gelu() -> Self {
        Self {
            second: Some(gelu_second),
            third: Some(gelu_third),
            degrees: vec![4, 4, 3],
            left_tail: Some(vec![c(1e-5)]),
            right_tail: Some(vec![c(1e-5), F::one()]),
            ..Self::new("gelu", gelu_exact)
        }
    }

    pub fn sigmoid() -> Self {
        Self {
            second: Some(sigmoid_second),
            third: Some(sigmoid_third),
            order: DerivativeOrder::Third,
            flatness: None,
            degrees: vec![3, 4],
            window: (F::zero(), c(10.0)),
            symmetry: Symmetry::Complement,
            right_tail: Some(vec![F::one()]),
            ..Self::new("sigmoid", sigmoid_exact)
        }
    }

    pub fn tanh() -> Self {
        Self {
            second: Some(tanh_second),
            third: Some(tanh_third),
            order: DerivativeOrder::Third,
            flatness: None,
            degrees: vec![3, 4],
            window: (F::zero(), c(8.0)),
            symmetry: Symmetry::Odd,
            right_tail: Some(vec![F::one()]),
            ..Self::new("tanh", tanh_exact)
        }
    }

    pub fn mish() -> Self {
        Self {
            first: Some(mish_first),
            flatness: None,
            degrees: vec![7],
            left_tail: Some(vec![F::zero()]),
            right_tail: Some(vec![F::zero(), F::one()]),
            ..Self::new("mish", mish_exact)
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "gelu" => Ok(Self::gelu()),
            "sigmoid" => Ok(Self::sigmoid()),
            "tanh" => Ok(Self::tanh()),
            "mish" => Ok(Self::mish()),
            other => Err(Error::Config(format!("no fit preset for {other:?}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return Err(Error::Config("fit degrees must be at least 1".into()));
        }
        if self.flatness.is_some_and(|t| t <= F::zero()) {
            return Err(Error::Config("flatness threshold must be positive".into()));
        }
        if self.samples < 2 || !(self.window.0 < self.window.1) {
            return Err(Error::Config(
                "fit needs two samples and a non-empty window".into(),
            ));
        }
        Ok(())
    }

    /// Analytic derivative when supplied, otherwise a central difference of the one below.
    pub fn derivative(&self, order: u32, x: F) -> F {
        let analytic = match order {
            0 => return (self.target)(x),
            1 => self.first,
            2 => self.second,
            3 => self.third,
            _ => None,
        };
        if let Some(f) = analytic {
            return f(x);
        }
        let h = c::<F>(DIFF_STEP);
        (self.derivative(order - 1, x + h) - self.derivative(order - 1, x - h)) / (h + h)
    }

    fn search_order(&self) -> u32 {
        match self.order {
            DerivativeOrder::Second => 2,
            DerivativeOrder::Third => 3,
        }
    }
}

fn bisect<F: Float>(f: impl Fn(F) -> F, mut lo: F, mut hi: F) -> F {
    let tol = c::<F>(ROOT_TOLERANCE);
    let mut f_lo = f(lo);
    while hi - lo > tol {
        let mid = (lo + hi) / c(2.0);
        let f_mid = f(mid);
        if f_mid == F::zero() {
            return mid;
        }
        if (f_mid < F::zero()) == (f_lo < F::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / c(2.0)
}

/// Zeros of the chosen derivative in the window, plus outer flatness points when a threshold is set.
pub fn find_boundaries<F: Float>(spec: &FitSpec<F>) -> Result<Vec<F>> {
    spec.validate()?;
    let (lo, hi) = spec.window;
    let order = spec.search_order();
    let d = |x: F| spec.derivative(order, x);
    let step = (hi - lo) / c(SCAN_POINTS as f64);
    let grid: Vec<F> = (0..=SCAN_POINTS).map(|i| lo + step * c(i as f64)).collect();
    let values: Vec<F> = grid.iter().map(|&x| d(x)).collect();
    let mut roots = Vec::new();
    for i in 0..SCAN_POINTS {
        let (a, b) = (values[i], values[i + 1]);
        if a == F::zero() {
            if i > 0 {
                roots.push(grid[i]);
            }
        } else if b != F::zero() && (a < F::zero()) != (b < F::zero()) {
            roots.push(bisect(d, grid[i], grid[i + 1]));
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRootFound {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    if let Some(t) = spec.flatness {
        let excess = |x: F| spec.derivative(2, x).abs().max(spec.derivative(3, x).abs()) - t;
        let first = roots[0];
        let last = roots[roots.len() - 1];
        if let Some(i) = grid.iter().position(|&x| excess(x) >= F::zero()) {
            if i > 0 && grid[i] <= first {
                roots.insert(0, bisect(excess, grid[i - 1], grid[i]));
            }
        }
        if let Some(i) = grid.iter().rposition(|&x| excess(x) >= F::zero()) {
            if i < SCAN_POINTS && grid[i] >= last {
                roots.push(bisect(excess, grid[i], grid[i + 1]));
            }
        }
    }
    Ok(roots)
}

/// Unweighted least-squares polynomial through `(xs, ys)`, ascending degree.
pub fn least_squares(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    let n = degree + 1;
    if xs.len() < n || xs.len() != ys.len() {
        return Err(Error::IllConditioned);
    }
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let center = (min + max) / 2.0;
    let half = ((max - min) / 2.0).max(f64::MIN_POSITIVE);
    let mut ata = vec![vec![0.0; n]; n];
    let mut aty = vec![0.0; n];
    let mut powers = vec![0.0; 2 * n - 1];
    for (&x, &y) in xs.iter().zip(ys) {
        let t = (x - center) / half;
        powers[0] = 1.0;
        for k in 1..powers.len() {
            powers[k] = powers[k - 1] * t;
        }
        for i in 0..n {
            aty[i] += y * powers[i];
            for j in 0..n {
                ata[i][j] += powers[i + j];
            }
        }
    }
    let scale = ata.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
            .expect("non-empty range");
        if ata[pivot][col].abs() <= scale * 1e-13 {
            return Err(Error::IllConditioned);
        }
        ata.swap(col, pivot);
        aty.swap(col, pivot);
        for row in col + 1..n {
            let f = ata[row][col] / ata[col][col];
            for k in col..n {
                ata[row][k] -= f * ata[col][k];
            }
            aty[row] -= f * aty[col];
        }
    }
    let mut in_t = vec![0.0; n];
    for row in (0..n).rev() {
        let rest: f64 = (row + 1..n).map(|k| ata[row][k] * in_t[k]).sum();
        in_t[row] = (aty[row] - rest) / ata[row][row];
    }
    let scaled: Vec<f64> = in_t
        .iter()
        .enumerate()
        .map(|(i, a)| a / half.powi(i as i32))
        .collect();
    Ok(super::recenter(&scaled, -center))
}

/// Fits every piece not covered by a fixed tail over its interval.
pub fn fit_segments<F: Float>(spec: &FitSpec<F>, boundaries: &[F]) -> Result<PiecewisePoly<F>> {
    spec.validate()?;
    let (lo, hi) = spec.window;
    let mut edges = Vec::with_capacity(boundaries.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(boundaries);
    edges.push(hi);
    let pieces = boundaries.len() + 1;
    let mut segments = Vec::with_capacity(pieces);
    let mut fitted = 0usize;
    for i in 0..pieces {
        let fixed = match i {
            0 => spec.left_tail.clone(),
            _ if i == pieces - 1 => spec.right_tail.clone(),
            _ => None,
        };
        let fixed = if pieces == 1 { None } else { fixed };
        if let Some(tail) = fixed {
            segments.push(tail);
            continue;
        }
        let degree = spec.degrees[fitted.min(spec.degrees.len() - 1)];
        fitted += 1;
        let (a, b) = (edges[i].to_f64().unwrap(), edges[i + 1].to_f64().unwrap());
        if !(a < b) {
            return Err(Error::Config(format!("empty fit interval [{a}, {b}]")));
        }
        let step = (b - a) / (spec.samples - 1) as f64;
        let xs: Vec<f64> = (0..spec.samples).map(|k| a + step * k as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (spec.target)(c(x)).to_f64().unwrap())
            .collect();
        segments.push(
            least_squares(&xs, &ys, degree)?
                .into_iter()
                .map(c)
                .collect(),
        );
    }
    PiecewisePoly::new(
        spec.name.clone(),
        spec.symmetry,
        boundaries.to_vec(),
        segments,
    )
}
