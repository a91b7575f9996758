//! Double-precision reference for the block, written directly from the
//! attention, LayerNorm and feed-forward definitions.

use num_traits::Float;

use super::{BlockWeights, Matrix};

fn cast<F: Float>(x: f64) -> F {
    F::from(x).expect("f64 converts to the scalar type")
}

/// `x·Φ(x)` with the error function.
pub fn gelu<F: Float>(x: F) -> F {
    crate::approx::gelu_exact(x)
}

/// Row-wise softmax.
pub fn softmax<F: Float>(x: &Matrix<F>) -> Matrix<F> {
    let mut out = Matrix::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let row = x.row(i);
        let max = row.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
        let e: Vec<F> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum = e.iter().fold(F::zero(), |a, &v| a + v);
        for (j, v) in e.into_iter().enumerate() {
            out.data[i * x.cols + j] = v / sum;
        }
    }
    out
}

/// Row-wise `γ·(x − μ)/σ + β` with the population deviation.
pub fn layer_norm<F: Float>(x: &Matrix<F>, gamma: &[F], beta: &[F]) -> Matrix<F> {
    let n = cast::<F>(x.cols as f64);
    let mut out = Matrix::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let row = x.row(i);
        let mu = row.iter().fold(F::zero(), |a, &v| a + v) / n;
        let var = row.iter().fold(F::zero(), |a, &v| a + (v - mu) * (v - mu)) / n;
        let sigma = var.sqrt();
        for (j, &v) in row.iter().enumerate() {
            out.data[i * x.cols + j] = gamma[j] * (v - mu) / sigma + beta[j];
        }
    }
    out
}

/// `softmax(Q·Kᵀ/√d_k)·V`.
pub fn attention<F: Float>(q: &Matrix<F>, k: &Matrix<F>, v: &Matrix<F>) -> Matrix<F> {
    let scale = cast::<F>(q.cols as f64).sqrt().recip();
    softmax(&q.matmul(&k.transpose()).map(|s| s * scale)).matmul(v)
}

/// Block output for input `x` (`d_s × d_m`).
pub fn oracle_block<F: Float>(x: &Matrix<F>, w: &BlockWeights<F>) -> Matrix<F> {
    let heads: Vec<Matrix<F>> = (0..w.config.h)
        .map(|i| {
            attention(
                &x.matmul(&w.w_q[i]),
                &x.matmul(&w.w_k[i]),
                &x.matmul(&w.w_v[i]),
            )
        })
        .collect();
    let attn = Matrix::hconcat(&heads).matmul(&w.w_o);
    let ln1 = layer_norm(&x.add(&attn), &w.ln1_gamma, &w.ln1_beta);
    let hidden = ln1.matmul(&w.w_f1).add_row(&w.b_f1).map(gelu);
    let ffn = hidden.matmul(&w.w_f2).add_row(&w.b_f2);
    layer_norm(&ln1.add(&ffn), &w.ln2_gamma, &w.ln2_beta)
}
