mod common;

use common::*;
use ptinfer::approx;
use ptinfer::fixedpoint::decode_slice;
use ptinfer::protocols::{
    layernorm_ciphertexts, matmul_ciphertexts, matmul_local, pi_gelu_shares, pi_ln, pi_matmul,
    pi_matmul_shared, pi_softmax, segment_code, softmax_ciphertexts, transpose, GeluPlan, LnParams,
    MatrixShape,
};
use ptinfer::sharing::reconstruct;
use ptinfer::{Domain, Error, Share};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const SLOTS: usize = 1024;

#[test]
fn matmul_identity_scale_zero() {
    let cfg = config(SLOTS);
    let shape = MatrixShape::new(2, 2, 2).unwrap();
    let (a, b) = pair(
        &cfg,
        1,
        |p| pi_matmul(p, &[1, 0, 0, 1], shape),
        |p| pi_matmul(p, &[5, 6, 7, 8], shape),
    )
    .unwrap();
    assert_eq!(open(&a.share, &b.share, &cfg), vec![5, 6, 7, 8]);
    assert_eq!(a.cost, b.cost);
}

#[test]
fn matmul_random_matches_modular_oracle() {
    let cfg = config(SLOTS);
    let fp = cfg.fixedpoint;
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for (m, n, h) in [(3, 4, 2), (7, 5, 300), (40, 3, 64)] {
        let shape = MatrixShape::new(m, n, h).unwrap();
        let am: Vec<u64> = (0..m * n).map(|_| rng.gen_range(0..fp.p)).collect();
        let bm: Vec<u64> = (0..n * h).map(|_| rng.gen_range(0..fp.p)).collect();
        let (ra, rb) = pair(
            &cfg,
            3,
            |p| pi_matmul(p, &am, shape),
            |p| pi_matmul(p, &bm, shape),
        )
        .unwrap();
        assert_eq!(
            open(&ra.share, &rb.share, &cfg),
            matmul_local(&fp, Domain::Field, &am, &bm, m, n, h)
        );
        let cts = matmul_ciphertexts(shape, SLOTS).unwrap() as u64;
        let ct_bytes = cfg.he_context().unwrap().ciphertext_bytes() as u64;
        assert_eq!(ra.cost.message_count, 2);
        assert_eq!(ra.cost.total_bytes(), cts * ct_bytes + 2 * 8);
    }
}

#[test]
fn matmul_rejects_bad_shapes() {
    let cfg = config(SLOTS);
    let shape = MatrixShape::new(2, 2, SLOTS + 1).unwrap();
    let err = pair(
        &cfg,
        4,
        |p| pi_matmul(p, &[0; 4], shape),
        |p| pi_matmul(p, &[0; 4], shape),
    )
    .unwrap_err();
    assert!(matches!(err, Error::CapacityExceeded { .. }), "{err}");
    let shape = MatrixShape::new(2, 2, 2).unwrap();
    let err = pair(
        &cfg,
        4,
        |p| pi_matmul(p, &[0; 3], shape),
        |p| pi_matmul(p, &[0; 4], shape),
    )
    .unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch(_)), "{err}");
}

#[test]
fn matmul_transcript_shape() {
    let cfg = config(SLOTS);
    let shape = MatrixShape::new(2, 3, 4).unwrap();
    let (la, lb) = pair(
        &cfg,
        5,
        |p| {
            pi_matmul(p, &[1; 6], shape)?;
            Ok(message_labels(p))
        },
        |p| {
            pi_matmul(p, &[1; 12], shape)?;
            Ok(message_labels(p))
        },
    )
    .unwrap();
    assert_eq!(la, ["matmul/x_enc", "matmul/c_mask"]);
    assert_eq!(la, lb);
}

fn shared_product(q: &[u64], k: &[u64], d: usize, m: usize, e: usize, seed: u64) -> Vec<u64> {
    let cfg = config(SLOTS);
    let (qa, qb) = split(q, Domain::Field, &cfg, seed);
    let (ka, kb) = split(k, Domain::Field, &cfg, seed + 1);
    let (a, b) = pair(
        &cfg,
        seed,
        move |p| pi_matmul_shared(p, &qa, &ka, d, m, e),
        move |p| pi_matmul_shared(p, &qb, &kb, d, m, e),
    )
    .unwrap();
    assert_eq!(a.share.len(), d * m);
    open(&a.share, &b.share, &cfg)
}

#[test]
fn matmul_shared_matches_oracle() {
    let cfg = config(SLOTS);
    let fp = cfg.fixedpoint;
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let (d, m, e) = (4, 5, 3);
    let q: Vec<u64> = (0..d * e).map(|_| rng.gen_range(0..fp.p)).collect();
    let k: Vec<u64> = (0..m * e).map(|_| rng.gen_range(0..fp.p)).collect();
    let want = matmul_local(&fp, Domain::Field, &q, &transpose(&k, m, e), d, e, m);
    assert_eq!(shared_product(&q, &k, d, m, e, 7), want);
    assert_eq!(
        shared_product(&vec![0; d * e], &k, d, m, e, 8),
        vec![0; d * m]
    );
}

#[test]
fn matmul_shared_degenerate_sharing_is_local_product() {
    let cfg = config(SLOTS);
    let fp = cfg.fixedpoint;
    let q = [1, 2, 3, 4, 5, 6];
    let k = [7, 8, 9, 10, 11, 12];
    let want = matmul_local(&fp, Domain::Field, &q, &transpose(&k, 2, 3), 2, 3, 2);
    let (a, b) = pair(
        &cfg,
        9,
        |p| {
            let qa = Share::new(Domain::Field, p.role, q.to_vec());
            let ka = Share::new(Domain::Field, p.role, k.to_vec());
            pi_matmul_shared(p, &qa, &ka, 2, 2, 3)
        },
        |p| {
            let z = Share::zeros(Domain::Field, p.role, 6);
            pi_matmul_shared(p, &z, &z, 2, 2, 3)
        },
    )
    .unwrap();
    assert_eq!(open(&a.share, &b.share, &cfg), want);
}

fn run_softmax(
    x: &[f64],
    rows: usize,
    cols: usize,
    seed: u64,
) -> (Vec<f64>, ptinfer::CostReport, Vec<String>) {
    let cfg = config(SLOTS);
    let (xa, xb) = split(&encode(x, &cfg, Domain::Ring), Domain::Ring, &cfg, seed);
    let (a, b) = pair(
        &cfg,
        seed,
        move |p| Ok((pi_softmax(p, &xa, rows, cols)?, message_labels(p))),
        move |p| pi_softmax(p, &xb, rows, cols),
    )
    .unwrap();
    assert_eq!(a.0.scale, cfg.fixedpoint.s);
    (
        open_real(&a.0.share, &b.share, a.0.scale, &cfg),
        a.0.cost,
        a.1,
    )
}

#[test]
fn softmax_uniform_and_two_to_one() {
    let (y, _, _) = run_softmax(&[0.7; 8], 1, 8, 10);
    for v in y {
        assert!((v - 0.125).abs() <= 2f64.powi(-8), "{v}");
    }
    let (y, _, _) = run_softmax(&[2f64.ln(), 0.0], 1, 2, 11);
    assert!((y[0] - 2.0 / 3.0).abs() <= 2f64.powi(-8), "{y:?}");
    assert!((y[1] - 1.0 / 3.0).abs() <= 2f64.powi(-8), "{y:?}");
}

#[test]
fn softmax_random_rows_within_tolerance() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let (rows, cols) = (16, 33);
    let x: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-5.0..0.0)).collect();
    let (y, cost, labels) = run_softmax(&x, rows, cols, 13);
    let want = softmax_rows(&x, cols);
    assert!(
        max_abs_diff(&y, &want) <= 2f64.powi(-8),
        "{}",
        max_abs_diff(&y, &want)
    );
    for r in y.chunks(cols) {
        assert!((r.iter().sum::<f64>() - 1.0).abs() <= cols as f64 * 2f64.powi(-8));
    }
    assert_eq!(
        labels,
        [
            "softmax/e_share",
            "softmax/s1",
            "softmax/s2",
            "softmax/y_return"
        ]
    );
    let ct_bytes = config(SLOTS).he_context().unwrap().ciphertext_bytes() as u64;
    assert_eq!(
        cost.message_bytes(),
        softmax_ciphertexts(rows, cols, SLOTS) as u64 * ct_bytes + 4 * 8
    );
    assert!(cost.uncosted.contains("lt") && !cost.uncosted.contains("rexp"));
}

#[test]
fn softmax_rejects_oversized_rows() {
    let cfg = config(SLOTS);
    let cols = 1 << 10;
    let x = Share::zeros(Domain::Ring, ptinfer::Role::A, cols);
    let err = pair(&cfg, 14, move |p| pi_softmax(p, &x, 1, cols), |_| Ok(())).unwrap_err();
    assert!(matches!(err, Error::CapacityExceeded { .. }), "{err}");
}

fn run_ln(
    x: &[f64],
    rows: usize,
    n: usize,
    gamma: &[f64],
    beta: &[f64],
    seed: u64,
) -> ptinfer::Result<(Vec<f64>, Vec<String>)> {
    let cfg = config(SLOTS);
    let (xa, xb) = split(&encode(x, &cfg, Domain::Ring), Domain::Ring, &cfg, seed);
    let params = LnParams::new(
        encode(gamma, &cfg, Domain::Field),
        encode(beta, &cfg, Domain::Field),
    )?;
    let (a, b) = pair(
        &cfg,
        seed,
        move |p| Ok((pi_ln(p, &xa, rows, n, None)?, message_labels(p))),
        move |p| pi_ln(p, &xb, rows, n, Some(&params)),
    )?;
    Ok((open_real(&a.0.share, &b.share, a.0.scale, &cfg), a.1))
}

#[test]
fn layernorm_three_values() {
    let (y, labels) = run_ln(&[1.0, 2.0, 3.0], 1, 3, &[1.0; 3], &[0.0; 3], 20).unwrap();
    let want = [-1.224744871391589, 0.0, 1.224744871391589];
    assert!(max_abs_diff(&y, &want) <= 2f64.powi(-6), "{y:?}");
    assert_eq!(
        labels,
        [
            "layernorm/a_share",
            "layernorm/sq_mask",
            "layernorm/k_mask",
            "layernorm/rho_share",
            "layernorm/z_mask",
            "layernorm/z_enc",
            "layernorm/y_mask"
        ]
    );
}

#[test]
fn layernorm_zero_gain_outputs_beta() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let n = 16;
    let x: Vec<f64> = (0..4 * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let beta: Vec<f64> = (0..n).map(|j| j as f64 * 0.25 - 2.0).collect();
    let (y, _) = run_ln(&x, 4, n, &[0.0; 16], &beta, 22).unwrap();
    for r in y.chunks(n) {
        assert!(max_abs_diff(r, &beta) <= 2f64.powi(-10));
    }
}

#[test]
fn layernorm_random_rows_within_tolerance() {
    let mut rng = ChaCha20Rng::seed_from_u64(23);
    let (rows, n) = (8, 64);
    let x: Vec<f64> = (0..rows * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let gamma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let (y, _) = run_ln(&x, rows, n, &gamma, &beta, 24).unwrap();
    let want = layernorm_rows(&x, n, &gamma, &beta);
    assert!(
        max_abs_diff(&y, &want) <= 2f64.powi(-6),
        "{}",
        max_abs_diff(&y, &want)
    );
}

#[test]
fn layernorm_low_variance_rows_within_tolerance() {
    let mut rng = ChaCha20Rng::seed_from_u64(26);
    let (rows, n) = (4, 64);
    let half_width = (3.0f64 * 1e-3).sqrt();
    let x: Vec<f64> = (0..rows * n)
        .map(|_| rng.gen_range(-half_width..half_width))
        .collect();
    let cfg = config(SLOTS);
    let xq = decode_slice(
        &encode(&x, &cfg, Domain::Ring),
        cfg.fixedpoint.s,
        &cfg.fixedpoint,
        Domain::Ring,
    );
    let (y, _) = run_ln(&x, rows, n, &[1.0; 64], &[0.0; 64], 27).unwrap();
    let want = layernorm_rows(&xq, n, &[1.0; 64], &[0.0; 64]);
    assert!(
        max_abs_diff(&y, &want) <= 2f64.powi(-6),
        "{}",
        max_abs_diff(&y, &want)
    );
}

#[test]
fn layernorm_constant_row_is_degenerate() {
    let err = run_ln(&[0.5; 8], 2, 4, &[1.0; 4], &[0.0; 4], 25).unwrap_err();
    assert!(
        matches!(err.root(), Error::DegenerateRow { row: 0 }),
        "{err}"
    );
}

#[test]
fn layernorm_count_formula() {
    assert_eq!(layernorm_ciphertexts(3, 4, SLOTS), 8);
}

fn run_gelu(x: &[f64], seed: u64) -> (Vec<f64>, Vec<String>, ptinfer::CostReport) {
    let cfg = config(SLOTS);
    let plan = GeluPlan::standard(&cfg.fixedpoint);
    let (xa, xb) = split(&encode(x, &cfg, Domain::Field), Domain::Field, &cfg, seed);
    let plan_b = plan;
    let (a, b) = pair(
        &cfg,
        seed,
        move |p| Ok((pi_gelu_shares(p, &plan, &xa)?, message_labels(p))),
        move |p| pi_gelu_shares(p, &plan_b, &xb),
    )
    .unwrap();
    (
        open_real(&a.0.share, &b.share, a.0.scale, &cfg),
        a.1,
        a.0.cost,
    )
}

#[test]
fn gelu_spot_values() {
    let cfg = config(SLOTS);
    let ulp = 2f64.powi(-(cfg.fixedpoint.s as i32));
    let table = approx::gelu::<f64>();
    let (y, labels, _) = run_gelu(&[10.0, -10.0, 0.0, 1.0], 30);
    assert!((y[0] - 10.0).abs() <= 2.0 * ulp);
    assert!(y[1].abs() <= 2.0 * ulp);
    assert!((y[2] - 0.001193207).abs() <= 2.0 * ulp);
    assert!((y[3] - table.eval(1.0)).abs() <= 2.0 * ulp);
    assert_eq!(
        labels,
        [
            "gelu_input/x_enc",
            "gelu/x_mask",
            "gelu/b_enc",
            "gelu/sq_mask",
            "gelu/sq_enc",
            "gelu/pow_mask",
            "gelu/poly_enc",
            "gelu/y_mask"
        ]
    );
}

#[test]
fn gelu_sweep_within_two_ulp() {
    let cfg = config(SLOTS);
    let fp = cfg.fixedpoint;
    let ulp = 2f64.powi(-(fp.s as i32));
    let table = approx::gelu::<f64>();
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let mut x: Vec<f64> = (0..600).map(|_| rng.gen_range(-7.5..7.5)).collect();
    for b in &table.boundaries {
        for d in [-2.0, -1.0, 0.0, 1.0] {
            x.push(b + d * ulp);
        }
    }
    let xq: Vec<f64> = decode_slice(&encode(&x, &cfg, Domain::Field), fp.s, &fp, Domain::Field);
    let (y, _, cost) = run_gelu(&x, 32);
    let want: Vec<f64> = xq.iter().map(|&v| table.eval(v)).collect();
    assert!(
        max_abs_diff(&y, &want) <= 2.0 * ulp,
        "{}",
        max_abs_diff(&y, &want) / ulp
    );
    let ct_bytes = cfg.he_context().unwrap().ciphertext_bytes() as u64;
    let gelu_bytes = cost.bytes_with_prefix("gelu/");
    assert_eq!(gelu_bytes, 14 * ct_bytes + 7 * 8);
}

#[test]
fn gelu_segment_code_is_one_hot() {
    let cfg = config(SLOTS);
    let fp = cfg.fixedpoint;
    let plan = GeluPlan::standard(&fp);
    let mut ints: Vec<i128> = vec![-40000, -20788, 0, 40000];
    for &t in &plan.thresholds {
        ints.extend([t - 1, t, t + 1]);
    }
    let raw: Vec<u64> = ints.iter().map(|&v| fp.reduce(Domain::Ring, v)).collect();
    let len = raw.len();
    let (xa, xb) = split(&raw, Domain::Ring, &cfg, 33);
    let plan_b = plan;
    let (a, b) = pair(
        &cfg,
        34,
        move |p| segment_code(p, &plan, &xa),
        move |p| segment_code(p, &plan_b, &xb),
    )
    .unwrap();
    let bits = reconstruct(&a, &b, &fp).unwrap();
    for (i, &v) in ints.iter().enumerate() {
        let code: Vec<u64> = (0..5).map(|k| bits[k * len + i]).collect();
        assert_eq!(code.iter().sum::<u64>(), 1, "{v}: {code:?}");
        let want = plan.thresholds.iter().filter(|&&t| v >= t).count();
        assert_eq!(code[want], 1, "{v}: {code:?}");
    }
}
