//! Shipped coefficient tables and the exact activations they replace.

use num_traits::Float;

use super::{PiecewisePoly, Symmetry};
use crate::error::{Error, Result};

pub const TABLE_NAMES: [&str; 4] = ["gelu", "sigmoid", "tanh", "mish"];

const GELU_EPSILON: f64 = 1e-5;
const GELU_INNER: f64 = std::f64::consts::SQRT_2;
const GELU_OUTER: f64 = 5.075;

const GELU_LEFT: [f64; 5] = [
    -0.568686678,
    -0.529288810,
    -0.183509590,
    -0.028070202,
    -0.001597741,
];
const GELU_MIDDLE: [f64; 5] = [0.001193207, 0.5, 0.385858026, 0.0, -0.045101361];
const GELU_RIGHT: [f64; 4] = [-0.438406187, 1.340789252, -0.087184212, 0.007334718];

const SIGMOID_OUTER: f64 = 6.48;
const SIGMOID_NEAR: [f64; 4] = [0.4998102695, 0.2527736008, -0.0086980795, -0.0127621849];
const SIGMOID_FAR: [f64; 5] = [
    0.4489827105,
    0.3642809155,
    -0.0948498277,
    0.0113621587,
    -0.0005220290,
];

const TANH_OUTER: f64 = 4.60;
const TANH_NEAR: [f64; 4] = [-0.0018890324, 1.0384417257, -0.1695016932, -0.1084776546];
const TANH_FAR: [f64; 5] = [
    0.0800126966,
    1.0756763251,
    -0.4766182792,
    0.0938427835,
    -0.0068823466,
];

const MISH_OUTER: f64 = 8.0;
const MISH_LOW: f64 = -2.2563763963607935;
const MISH_HIGH: f64 = 1.4905711794854284;
const MISH_LEFT: [f64; 8] = [
    -0.1150272397,
    0.5194677655,
    0.4293028981,
    0.1459472737,
    0.0271015218,
    0.0028988426,
    0.0001685503,
    0.0000041415,
];
const MISH_MIDDLE: [f64; 8] = [
    0.0000929623,
    0.5993108159,
    0.3185423599,
    -0.0135480666,
    -0.0420248186,
    -0.0022342097,
    0.0043057993,
    0.0008690923,
];
const MISH_RIGHT: [f64; 8] = [
    -0.2470775212,
    1.0311064672,
    0.1227243900,
    -0.0757410810,
    0.0200857395,
    -0.0027959123,
    0.0002003775,
    -0.000005848,
];

fn cast<F: Float>(xs: &[f64]) -> Vec<F> {
    xs.iter().map(|&x| F::from(x).unwrap()).collect()
}

/// Five-piece GeLU: `ε`, three fitted pieces, then `x + ε`.
pub fn gelu<F: Float>() -> PiecewisePoly<F> {
    PiecewisePoly::new(
        "gelu",
        Symmetry::None,
        cast(&[-GELU_OUTER, -GELU_INNER, GELU_INNER, GELU_OUTER]),
        vec![
            cast(&[GELU_EPSILON]),
            cast(&GELU_LEFT),
            cast(&GELU_MIDDLE),
            cast(&GELU_RIGHT),
            cast(&[GELU_EPSILON, 1.0]),
        ],
    )
    .expect("shipped gelu table is valid")
}

/// Sigmoid on `x >= 0`, mirrored by `1 − f(−x)`.
pub fn sigmoid<F: Float>() -> PiecewisePoly<F> {
    let near = (2.0 + 3f64.sqrt()).ln();
    PiecewisePoly::new(
        "sigmoid",
        Symmetry::Complement,
        cast(&[near, SIGMOID_OUTER]),
        vec![cast(&SIGMOID_NEAR), cast(&SIGMOID_FAR), cast(&[1.0])],
    )
    .expect("shipped sigmoid table is valid")
}

/// Tanh on `x >= 0`, mirrored as an odd function.
pub fn tanh<F: Float>() -> PiecewisePoly<F> {
    let near = ((3f64.sqrt() + 2.0) / 2f64.sqrt()).ln();
    PiecewisePoly::new(
        "tanh",
        Symmetry::Odd,
        cast(&[near, TANH_OUTER]),
        vec![cast(&TANH_NEAR), cast(&TANH_FAR), cast(&[1.0])],
    )
    .expect("shipped tanh table is valid")
}

/// Five-piece Mish: `0`, three degree-7 pieces, then `x`.
pub fn mish<F: Float>() -> PiecewisePoly<F> {
    PiecewisePoly::new(
        "mish",
        Symmetry::None,
        cast(&[-MISH_OUTER, MISH_LOW, MISH_HIGH, MISH_OUTER]),
        vec![
            cast(&[0.0]),
            cast(&MISH_LEFT),
            cast(&MISH_MIDDLE),
            cast(&MISH_RIGHT),
            cast(&[0.0, 1.0]),
        ],
    )
    .expect("shipped mish table is valid")
}

pub fn table_by_name<F: Float>(name: &str) -> Result<PiecewisePoly<F>> {
    match name {
        "gelu" => Ok(gelu()),
        "sigmoid" => Ok(sigmoid()),
        "tanh" => Ok(tanh()),
        "mish" => Ok(mish()),
        other => Err(Error::Config(format!("unknown table {other:?}"))),
    }
}

pub fn target_by_name<F: Float>(name: &str) -> Result<fn(F) -> F> {
    match name {
        "gelu" => Ok(gelu_exact),
        "sigmoid" => Ok(sigmoid_exact),
        "tanh" => Ok(tanh_exact),
        "mish" => Ok(mish_exact),
        other => Err(Error::Config(format!("unknown function {other:?}"))),
    }
}

fn to64<F: Float>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn from64<F: Float>(x: f64) -> F {
    F::from(x).unwrap_or_else(F::nan)
}

/// `x·Φ(x)` with the error function.
pub fn gelu_exact<F: Float>(x: F) -> F {
    let v = to64(x);
    from64(0.5 * v * (1.0 + libm::erf(v / std::f64::consts::SQRT_2)))
}

pub fn sigmoid_exact<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

pub fn tanh_exact<F: Float>(x: F) -> F {
    x.tanh()
}

fn softplus<F: Float>(x: F) -> F {
    if x > from64(30.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `x·tanh(ln(1 + e^x))`.
pub fn mish_exact<F: Float>(x: F) -> F {
    x * softplus(x).tanh()
}

fn normal_density<F: Float>(x: F) -> F {
    let norm = from64::<F>((2.0 * std::f64::consts::PI).sqrt());
    (-(x * x) / from64(2.0)).exp() / norm
}

pub(super) fn gelu_second<F: Float>(x: F) -> F {
    normal_density(x) * (from64::<F>(2.0) - x * x)
}

pub(super) fn gelu_third<F: Float>(x: F) -> F {
    normal_density(x) * (x * x * x - from64::<F>(4.0) * x)
}

pub(super) fn sigmoid_second<F: Float>(x: F) -> F {
    let s = sigmoid_exact(x);
    s * (F::one() - s) * (F::one() - s - s)
}

pub(super) fn sigmoid_third<F: Float>(x: F) -> F {
    let s = sigmoid_exact(x);
    let six = from64::<F>(6.0);
    s * (F::one() - s) * (F::one() - six * s + six * s * s)
}

pub(super) fn tanh_second<F: Float>(x: F) -> F {
    let t = x.tanh();
    from64::<F>(-2.0) * t * (F::one() - t * t)
}

pub(super) fn tanh_third<F: Float>(x: F) -> F {
    let t = x.tanh();
    from64::<F>(-2.0) * (F::one() - t * t) * (F::one() - from64::<F>(3.0) * t * t)
}

pub(super) fn mish_first<F: Float>(x: F) -> F {
    let t = softplus(x).tanh();
    t + x * (F::one() - t * t) * sigmoid_exact(x)
}
