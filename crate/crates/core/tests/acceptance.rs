//! Acceptance checks. Each test prints one `PASS` or `FAIL` line, then asserts.

mod common;

use std::io::Write;

use common::*;
use ptinfer::approx::{self, find_boundaries, mae, table_by_name, target_by_name, FitSpec};
use ptinfer::channel::{CostReport, Entry};
use ptinfer::fixedpoint::{
    decode_slice, field_to_ring, ring_to_field, ring_to_field_local, ConversionMode,
};
use ptinfer::model::{infer_block, oracle_block, BlockConfig, EncodedWeights, Matrix};
use ptinfer::protocols::{
    gelu_ciphertexts, layernorm_ciphertexts, matmul_ciphertexts, matmul_local, pi_gelu_shares,
    pi_ln, pi_matmul, pi_matmul_shared, pi_softmax, softmax_ciphertexts, GeluPlan, LnParams,
    MatrixShape,
};
use ptinfer::sharing::{b2a, invsqrt, lt, reconstruct, rexp, share};
use ptinfer::{BlockWeights, Config, Domain, FixedPointConfig, NetworkProfile, Role, Share};
use ptinfer_he::{Backend, HeContext, HeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const INSTANCES: u64 = 100;
const CORRECTNESS_SLOTS: usize = 1024;
const SOFTMAX_TOL: f64 = 1.0 / 256.0;
const LN_TOL: f64 = 1.0 / 64.0;
const GELU_ULPS: f64 = 2.0;
const BLOCK_TOL: f64 = 1.0 / 16.0;
const CT_KB_RANGE: (f64, f64) = (300.0, 400.0);
const BAND: f64 = 2.0;
const SOFTMAX_MB: f64 = 4.94;
const MATMUL_MB: f64 = 271.47;
const LN_MB: f64 = 154.69;
const GELU_MB: f64 = 928.77;
const MAE_TOL: f64 = 1e-9;
const BOUNDARY_TOL: f64 = 1e-6;
const PINNED_MAE: [(&str, f64); 4] = [
    ("gelu", 7.159_790_578_073_527e-4),
    ("sigmoid", 1.0644285866403453e-4),
    ("tanh", 9.181_033_272_183_167e-4),
    ("mish", 1.051_301_340_446_486e-4),
];

fn verdict(criterion: u32, name: &str, ok: bool, detail: &str) {
    let line = format!(
        "acceptance {criterion} {name}: {} ({detail})\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "{}", line.trim_end());
}

fn uniform(rng: &mut ChaCha20Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

fn quantized(xs: &[f64], cfg: &Config, domain: Domain) -> Vec<f64> {
    decode_slice(
        &encode(xs, cfg, domain),
        cfg.fixedpoint.s,
        &cfg.fixedpoint,
        domain,
    )
}

fn dims(rng: &mut ChaCha20Rng, i: u64, max: &[usize], min: &[usize]) -> Vec<usize> {
    max.iter()
        .zip(min)
        .map(|(&hi, &lo)| if i == 0 { hi } else { rng.gen_range(lo..=hi) })
        .collect()
}

fn f64_matmul(a: &[f64], b: &[f64], m: usize, n: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * h];
    for i in 0..m {
        for l in 0..n {
            for j in 0..h {
                out[i * h + j] += a[i * n + l] * b[l * h + j];
            }
        }
    }
    out
}

fn matmul_instance(cfg: &Config, rng: &mut ChaCha20Rng, i: u64) -> f64 {
    let d = dims(rng, i, &[32, 32, 64], &[1, 1, 1]);
    let (m, n, h) = (d[0], d[1], d[2]);
    let x = uniform(rng, m * n, -0.4, 0.4);
    let w = uniform(rng, n * h, -0.4, 0.4);
    let shape = MatrixShape::new(m, n, h).unwrap();
    let (xe, we) = (
        encode(&x, cfg, Domain::Field),
        encode(&w, cfg, Domain::Field),
    );
    let (a, b) = pair(
        cfg,
        i,
        |p| pi_matmul(p, &xe, shape),
        |p| pi_matmul(p, &we, shape),
    )
    .unwrap();
    let raw = open(&a.share, &b.share, cfg);
    assert_eq!(
        raw,
        matmul_local(&cfg.fixedpoint, Domain::Field, &xe, &we, m, n, h)
    );
    let got = decode_slice(&raw, 2 * cfg.fixedpoint.s, &cfg.fixedpoint, Domain::Field);
    let want = f64_matmul(
        &quantized(&x, cfg, Domain::Field),
        &quantized(&w, cfg, Domain::Field),
        m,
        n,
        h,
    );
    max_abs_diff(&got, &want)
}

fn matmul_shared_instance(cfg: &Config, rng: &mut ChaCha20Rng, i: u64) -> f64 {
    let dm = dims(rng, i, &[32, 32, 64], &[1, 1, 1]);
    let (d, m, e) = (dm[0], dm[1], dm[2]);
    let q = uniform(rng, d * e, -0.3, 0.3);
    let k = uniform(rng, m * e, -0.3, 0.3);
    let (qa, qb) = split(&encode(&q, cfg, Domain::Field), Domain::Field, cfg, 2 * i);
    let (ka, kb) = split(
        &encode(&k, cfg, Domain::Field),
        Domain::Field,
        cfg,
        2 * i + 1,
    );
    let (a, b) = pair(
        cfg,
        i,
        |p| pi_matmul_shared(p, &qa, &ka, d, m, e),
        |p| pi_matmul_shared(p, &qb, &kb, d, m, e),
    )
    .unwrap();
    let got = open_real(&a.share, &b.share, a.scale, cfg);
    let kt: Vec<f64> = (0..e * m)
        .map(|t| quantized(&k, cfg, Domain::Field)[(t % m) * e + t / m])
        .collect();
    let want = f64_matmul(&quantized(&q, cfg, Domain::Field), &kt, d, e, m);
    max_abs_diff(&got, &want)
}

fn softmax_instance(cfg: &Config, rng: &mut ChaCha20Rng, i: u64) -> f64 {
    let d = dims(rng, i, &[32, 32], &[1, 2]);
    let (rows, cols) = (d[0], d[1]);
    let x = uniform(rng, rows * cols, -4.0, 4.0);
    let (xa, xb) = split(&encode(&x, cfg, Domain::Ring), Domain::Ring, cfg, i);
    let (a, b) = pair(
        cfg,
        i,
        |p| pi_softmax(p, &xa, rows, cols),
        |p| pi_softmax(p, &xb, rows, cols),
    )
    .unwrap();
    let got = open_real(&a.share, &b.share, a.scale, cfg);
    max_abs_diff(&got, &softmax_rows(&quantized(&x, cfg, Domain::Ring), cols))
}

fn ln_instance(cfg: &Config, rng: &mut ChaCha20Rng, i: u64) -> f64 {
    let d = dims(rng, i, &[32, 64], &[1, 16]);
    let (rows, n) = (d[0], d[1]);
    let x = uniform(rng, rows * n, -2.0, 2.0);
    let gamma = uniform(rng, n, 0.5, 1.5);
    let beta = uniform(rng, n, -0.5, 0.5);
    let params = LnParams::new(
        encode(&gamma, cfg, Domain::Field),
        encode(&beta, cfg, Domain::Field),
    )
    .unwrap();
    let (xa, xb) = split(&encode(&x, cfg, Domain::Ring), Domain::Ring, cfg, i);
    let (a, b) = pair(
        cfg,
        i,
        |p| pi_ln(p, &xa, rows, n, None),
        |p| pi_ln(p, &xb, rows, n, Some(&params)),
    )
    .unwrap();
    let got = open_real(&a.share, &b.share, a.scale, cfg);
    let want = layernorm_rows(
        &quantized(&x, cfg, Domain::Ring),
        n,
        &quantized(&gamma, cfg, Domain::Field),
        &quantized(&beta, cfg, Domain::Field),
    );
    max_abs_diff(&got, &want)
}

fn gelu_instance(cfg: &Config, rng: &mut ChaCha20Rng, i: u64) -> f64 {
    let d = dims(rng, i, &[32, 128], &[1, 1]);
    let len = d[0] * d[1];
    let x = uniform(rng, len, -7.5, 7.5);
    let plan = GeluPlan::standard(&cfg.fixedpoint);
    let (xa, xb) = split(&encode(&x, cfg, Domain::Field), Domain::Field, cfg, i);
    let (a, b) = pair(
        cfg,
        i,
        |p| pi_gelu_shares(p, &plan, &xa),
        |p| pi_gelu_shares(p, &plan, &xb),
    )
    .unwrap();
    let got = open_real(&a.share, &b.share, a.scale, cfg);
    let table = approx::gelu::<f64>();
    let want: Vec<f64> = quantized(&x, cfg, Domain::Field)
        .iter()
        .map(|&v| table.eval(v))
        .collect();
    max_abs_diff(&got, &want) * (cfg.fixedpoint.s as f64).exp2()
}

#[test]
fn criterion_1_protocol_correctness() {
    let cfg = config(CORRECTNESS_SLOTS);
    type Instance = fn(&Config, &mut ChaCha20Rng, u64) -> f64;
    let cases: [(&str, Instance, f64); 5] = [
        ("matmul", matmul_instance, 0.0),
        ("matmul_shared", matmul_shared_instance, 0.0),
        ("softmax", softmax_instance, SOFTMAX_TOL),
        ("layernorm", ln_instance, LN_TOL),
        ("gelu_ulps", gelu_instance, GELU_ULPS),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, (name, run, tol)) in cases.into_iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + k as u64);
        let worst = (0..INSTANCES)
            .map(|i| run(&cfg, &mut rng, i))
            .fold(0.0, f64::max);
        ok &= worst <= tol;
        detail.push(format!("{name} worst {worst:.3e} <= {tol:.3e}"));
    }
    verdict(
        1,
        "protocol correctness",
        ok,
        &format!("{INSTANCES} instances each; {}", detail.join(", ")),
    );
}

fn he_sources_mention_rotation() -> Vec<String> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../he/src");
    let mut hits = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines() {
            let code = line.split("//").next().unwrap_or("").to_ascii_lowercase();
            if ["rotat", "galois", "automorph"]
                .iter()
                .any(|w| code.contains(w))
            {
                hits.push(format!("{}: {}", path.display(), line.trim()));
            }
        }
    }
    hits
}

#[test]
fn criterion_2_rotation_free_transcripts() {
    let cfg = config(CORRECTNESS_SLOTS);
    let rotation = he_sources_mention_rotation();
    let shape = MatrixShape::new(2, 3, 4).unwrap();
    let (matmul, _) = pair(
        &cfg,
        1,
        |p| pi_matmul(p, &[1; 6], shape).map(|_| message_labels(p)),
        |p| pi_matmul(p, &[1; 12], shape),
    )
    .unwrap();
    let z = |role, len| Share::zeros(Domain::Field, role, len);
    let (shared, _) = pair(
        &cfg,
        2,
        |p| pi_matmul_shared(p, &z(Role::A, 6), &z(Role::A, 9), 2, 3, 3).map(|_| message_labels(p)),
        |p| pi_matmul_shared(p, &z(Role::B, 6), &z(Role::B, 9), 2, 3, 3),
    )
    .unwrap();
    let x = encode(&[0.5, -1.0, 2.0, 0.0, 1.5, -0.25], &cfg, Domain::Ring);
    let (xa, xb) = split(&x, Domain::Ring, &cfg, 3);
    let (softmax, _) = pair(
        &cfg,
        3,
        |p| pi_softmax(p, &xa, 2, 3).map(|_| message_labels(p)),
        |p| pi_softmax(p, &xb, 2, 3),
    )
    .unwrap();
    let params = LnParams::new(
        encode(&[1.0; 3], &cfg, Domain::Field),
        encode(&[0.0; 3], &cfg, Domain::Field),
    )
    .unwrap();
    let (ln, _) = pair(
        &cfg,
        4,
        |p| pi_ln(p, &xa, 2, 3, None).map(|_| message_labels(p)),
        |p| pi_ln(p, &xb, 2, 3, Some(&params)),
    )
    .unwrap();
    let plan = GeluPlan::standard(&cfg.fixedpoint);
    let (ga, gb) = split(
        &encode(&[0.5, -3.0, 6.0], &cfg, Domain::Field),
        Domain::Field,
        &cfg,
        5,
    );
    let (gelu, _) = pair(
        &cfg,
        5,
        |p| pi_gelu_shares(p, &plan, &ga).map(|_| message_labels(p)),
        |p| pi_gelu_shares(p, &plan, &gb),
    )
    .unwrap();
    let expected: [(&str, Vec<String>, &[&str]); 5] = [
        ("matmul", matmul, &["matmul/x_enc", "matmul/c_mask"]),
        (
            "matmul_shared",
            shared,
            &[
                "matmul_shared/matmul/x_enc",
                "matmul_shared/matmul/c_mask",
                "matmul_shared/matmul/x_enc",
                "matmul_shared/matmul/c_mask",
                "matmul_shared/l_mask",
            ],
        ),
        (
            "softmax",
            softmax,
            &[
                "softmax/e_share",
                "softmax/s1",
                "softmax/s2",
                "softmax/y_return",
            ],
        ),
        (
            "layernorm",
            ln,
            &[
                "layernorm/a_share",
                "layernorm/sq_mask",
                "layernorm/k_mask",
                "layernorm/rho_share",
                "layernorm/z_mask",
                "layernorm/z_enc",
                "layernorm/y_mask",
            ],
        ),
        (
            "gelu",
            gelu,
            &[
                "gelu_input/x_enc",
                "gelu/x_mask",
                "gelu/b_enc",
                "gelu/sq_mask",
                "gelu/sq_enc",
                "gelu/pow_mask",
                "gelu/poly_enc",
                "gelu/y_mask",
            ],
        ),
    ];
    let mismatched: Vec<String> = expected
        .iter()
        .filter(|(_, got, want)| got.as_slice() != *want)
        .map(|(name, got, _)| format!("{name} got {got:?}"))
        .collect();
    let ok = rotation.is_empty() && mismatched.is_empty();
    let detail = format!(
        "rotation mentions in HE code: {}; transcript mismatches: {}",
        rotation.len(),
        if mismatched.is_empty() {
            "none".into()
        } else {
            mismatched.join("; ")
        }
    );
    verdict(2, "rotation-free transcripts", ok, &detail);
}

#[test]
fn criterion_3_ciphertext_size() {
    let p = FixedPointConfig::default().p;
    let rlwe = HeContext::new(HeParams::standard(p, Backend::Rlwe).unwrap()).unwrap();
    let clear = HeContext::new(HeParams::standard(p, Backend::Clear).unwrap()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let keys = rlwe.keygen_with(&mut rng, false);
    let values: Vec<u64> = (0..rlwe.slots()).map(|_| rng.gen_range(0..p)).collect();
    let ct = rlwe
        .encrypt(&keys.public, &rlwe.plaintext(&values).unwrap(), &mut rng)
        .unwrap();
    let bytes = rlwe.serialize_ct(&ct).len();
    let kb = bytes as f64 / 1000.0;
    let ok = (CT_KB_RANGE.0..=CT_KB_RANGE.1).contains(&kb) && clear.ciphertext_bytes() == bytes;
    let detail = format!(
        "N={}, q {:.1} bits, {bytes} bytes = {kb:.1} KB in [{}, {}], clear twin {} bytes",
        rlwe.slots(),
        rlwe.params().q_bits(),
        CT_KB_RANGE.0,
        CT_KB_RANGE.1,
        clear.ciphertext_bytes()
    );
    verdict(3, "ciphertext size", ok, &detail);
}

struct Measured {
    name: &'static str,
    total: u64,
    messages: u64,
    analytic: u64,
    reference_mb: f64,
    uncosted: Vec<String>,
}

impl Measured {
    fn in_band(&self) -> bool {
        let mb = self.total as f64 / 1e6;
        mb >= self.reference_mb / BAND && mb <= self.reference_mb * BAND
    }

    fn describe(&self) -> String {
        format!(
            "{} {:.2} MB vs {:.2} MB {} band, messages {} analytic {}, uncosted gadgets [{}]",
            self.name,
            self.total as f64 / 1e6,
            self.reference_mb,
            if self.in_band() { "in" } else { "outside" },
            self.messages,
            if self.messages == self.analytic {
                "exact"
            } else {
                "MISMATCH"
            },
            self.uncosted.join(" ")
        )
    }
}

fn framed(cts: usize, ct_bytes: u64, messages: u64) -> u64 {
    cts as u64 * ct_bytes + messages * 8
}

#[test]
fn criterion_4_communication() {
    let cfg = Config::clear();
    let slots = cfg.he.degree;
    let ct = cfg.he_context().unwrap().ciphertext_bytes() as u64;
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut rows = Vec::new();

    let (r, c) = (128, 128);
    let (xa, xb) = split(
        &encode(&uniform(&mut rng, r * c, -4.0, 4.0), &cfg, Domain::Ring),
        Domain::Ring,
        &cfg,
        41,
    );
    let (a, _) = pair(
        &cfg,
        41,
        |p| pi_softmax(p, &xa, r, c),
        |p| pi_softmax(p, &xb, r, c),
    )
    .unwrap();
    rows.push(Measured {
        name: "softmax 128x128",
        total: a.cost.total_bytes(),
        messages: a.cost.message_bytes(),
        analytic: framed(softmax_ciphertexts(r, c, slots), ct, 4),
        reference_mb: SOFTMAX_MB,
        uncosted: a.cost.uncosted.iter().cloned().collect(),
    });

    let shape = MatrixShape::new(128, 768, 64).unwrap();
    let x: Vec<u64> = (0..128 * 768)
        .map(|_| rng.gen_range(0..cfg.fixedpoint.p))
        .collect();
    let w: Vec<u64> = (0..768 * 64)
        .map(|_| rng.gen_range(0..cfg.fixedpoint.p))
        .collect();
    let (a, _) = pair(
        &cfg,
        42,
        |p| pi_matmul(p, &x, shape),
        |p| pi_matmul(p, &w, shape),
    )
    .unwrap();
    rows.push(Measured {
        name: "matmul 128x768x64",
        total: a.cost.total_bytes(),
        messages: a.cost.message_bytes(),
        analytic: framed(matmul_ciphertexts(shape, slots).unwrap(), ct, 2),
        reference_mb: MATMUL_MB,
        uncosted: a.cost.uncosted.iter().cloned().collect(),
    });

    let (r, n) = (128, 768);
    let (xa, xb) = split(
        &encode(&uniform(&mut rng, r * n, -2.0, 2.0), &cfg, Domain::Ring),
        Domain::Ring,
        &cfg,
        43,
    );
    let params = LnParams::new(
        encode(&uniform(&mut rng, n, 0.5, 1.5), &cfg, Domain::Field),
        encode(&uniform(&mut rng, n, -0.5, 0.5), &cfg, Domain::Field),
    )
    .unwrap();
    let (a, _) = pair(
        &cfg,
        43,
        |p| pi_ln(p, &xa, r, n, None),
        |p| pi_ln(p, &xb, r, n, Some(&params)),
    )
    .unwrap();
    rows.push(Measured {
        name: "layernorm 128x768",
        total: a.cost.total_bytes(),
        messages: a.cost.message_bytes(),
        analytic: framed(layernorm_ciphertexts(r, n, slots), ct, 7),
        reference_mb: LN_MB,
        uncosted: a.cost.uncosted.iter().cloned().collect(),
    });

    let len = 128 * 3072;
    let plan = GeluPlan::standard(&cfg.fixedpoint);
    let (ga, gb) = split(
        &encode(&uniform(&mut rng, len, -7.5, 7.5), &cfg, Domain::Field),
        Domain::Field,
        &cfg,
        44,
    );
    let (a, _) = pair(
        &cfg,
        44,
        |p| pi_gelu_shares(p, &plan, &ga),
        |p| pi_gelu_shares(p, &plan, &gb),
    )
    .unwrap();
    rows.push(Measured {
        name: "gelu 128x3072",
        total: a.cost.total_bytes(),
        messages: a.cost.message_bytes(),
        analytic: framed(gelu_ciphertexts(len, slots) + len.div_ceil(slots), ct, 8),
        reference_mb: GELU_MB,
        uncosted: a.cost.uncosted.iter().cloned().collect(),
    });

    let ok = rows.iter().all(|m| m.in_band() && m.messages == m.analytic);
    let detail = rows
        .iter()
        .map(Measured::describe)
        .collect::<Vec<_>>()
        .join("; ");
    verdict(4, "communication", ok, &format!("N={slots}; {detail}"));
}

#[test]
fn criterion_5_approximation_tables() {
    let spots = [
        ("gelu", approx::gelu::<f64>().eval(0.0), 0.001193207),
        ("sigmoid", approx::sigmoid::<f64>().eval(0.0), 0.4998102695),
        ("tanh", approx::tanh::<f64>().eval(0.0), -0.0018890324),
        ("mish", approx::mish::<f64>().eval(0.0), 0.0000929623),
    ];
    let spots_ok = spots.iter().all(|(_, got, want)| got == want);
    let gelu_b = find_boundaries(&FitSpec::<f64>::gelu()).unwrap();
    let sigmoid_b = find_boundaries(&FitSpec::<f64>::sigmoid()).unwrap();
    let mish_b = find_boundaries(&FitSpec::<f64>::mish()).unwrap();
    let boundary_err = [
        (gelu_b[1] + 2f64.sqrt()).abs(),
        (gelu_b[2] - 2f64.sqrt()).abs(),
        (sigmoid_b[0] - (2.0 + 3f64.sqrt()).ln()).abs(),
        (mish_b[0] + 2.2563763963607935).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let mae_err = PINNED_MAE
        .iter()
        .map(|&(name, want)| {
            let got = mae(
                &table_by_name(name).unwrap(),
                target_by_name(name).unwrap(),
                -6.0,
                6.0,
                10_000,
            );
            (got - want).abs()
        })
        .fold(0.0, f64::max);
    let ok = spots_ok && boundary_err <= BOUNDARY_TOL && mae_err <= MAE_TOL;
    let detail = format!(
        "spot values {}, worst boundary error {boundary_err:.2e} <= {BOUNDARY_TOL:e}, worst MAE drift {mae_err:.2e} <= {MAE_TOL:e}",
        if spots_ok { "exact" } else { "differ" }
    );
    verdict(5, "approximation tables", ok, &detail);
}

fn toy_config() -> Config {
    let mut c = Config::clear();
    c.fixedpoint = FixedPointConfig::new(10, 3, 13).unwrap();
    c.he.degree = 2;
    c
}

fn every_split(fp: &FixedPointConfig, domain: Domain, secrets: &[u64]) -> (Share, Share, Vec<u64>) {
    let m = fp.modulus(domain) as u64;
    let (mut a, mut b, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for &s in secrets {
        for r in 0..m {
            a.push(r);
            b.push(fp.sub(domain, s, r));
            x.push(s);
        }
    }
    (
        Share::new(domain, Role::A, a),
        Share::new(domain, Role::B, b),
        x,
    )
}

fn substrate_failures() -> Vec<String> {
    let cfg = toy_config();
    let fp = cfg.fixedpoint;
    let mut bad = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            bad.push(name.to_string());
        }
    };
    let mut rng = ChaCha20Rng::seed_from_u64(6);

    for domain in [Domain::Ring, Domain::Field, Domain::Bool] {
        let all: Vec<u64> = (0..fp.modulus(domain) as u64).collect();
        let (a, b, x) = every_split(&fp, domain, &all);
        check(
            "reconstruct every split",
            reconstruct(&a, &b, &fp).unwrap() == x,
        );
        let (sa, sb) = share(&all, domain, &fp, &mut rng).unwrap();
        check(
            "share then reconstruct",
            reconstruct(&sa, &sb, &fp).unwrap() == all,
        );
    }

    let (a, b, bits) = every_split(&fp, Domain::Bool, &[0, 1]);
    let (c, d, other) = (
        Share::new(Domain::Bool, Role::A, vec![0, 1, 1, 0]),
        Share::new(Domain::Bool, Role::B, vec![1, 1, 0, 0]),
        vec![1, 0, 1, 0],
    );
    let xor = reconstruct(&a.xor(&c).unwrap(), &b.xor(&d).unwrap(), &fp).unwrap();
    check(
        "xor",
        xor.iter()
            .zip(bits.iter().zip(&other))
            .all(|(&g, (&u, &v))| g == u ^ v),
    );
    check(
        "not",
        reconstruct(&a.not(), &b.not(), &fp).unwrap()
            == bits.iter().map(|b| b ^ 1).collect::<Vec<_>>(),
    );

    let ring: Vec<u64> = (0..1u64 << fp.k).collect();
    let xs: Vec<u64> = ring
        .iter()
        .flat_map(|&x| std::iter::repeat_n(x, ring.len()))
        .collect();
    let ys: Vec<u64> = ring.repeat(ring.len());
    let (xa, xb) = split(&xs, Domain::Ring, &cfg, 61);
    let (ya, yb) = split(&ys, Domain::Ring, &cfg, 62);
    let (la, lb) = pair(
        &cfg,
        61,
        |p| Ok((lt(p, &xa, &ya)?, lt(p, &ya, &xa)?)),
        |p| Ok((lt(p, &xb, &yb)?, lt(p, &yb, &xb)?)),
    )
    .unwrap();
    let less = reconstruct(&la.0, &lb.0, &fp).unwrap();
    let lifted = |v: u64| fp.lift(Domain::Ring, v);
    check(
        "lt over every ring pair",
        less.iter()
            .zip(xs.iter().zip(&ys))
            .all(|(&g, (&x, &y))| g == u64::from(lifted(x) < lifted(y))),
    );
    let differ = reconstruct(&la.0.xor(&la.1).unwrap(), &lb.0.xor(&lb.1).unwrap(), &fp).unwrap();
    check(
        "xor of both comparisons is inequality",
        differ
            .iter()
            .zip(xs.iter().zip(&ys))
            .all(|(&g, (&x, &y))| g == u64::from(x != y)),
    );

    for target in [Domain::Ring, Domain::Field] {
        for scale in 0..=fp.s {
            let (ba, bb) = (a.clone(), b.clone());
            let (oa, ob) = pair(
                &cfg,
                63,
                |p| b2a(p, &ba, target, scale),
                |p| b2a(p, &bb, target, scale),
            )
            .unwrap();
            let got = reconstruct(&oa, &ob, &fp).unwrap();
            let want: Vec<u64> = bits
                .iter()
                .map(|&v| fp.reduce(target, ((v + 1) << scale) as i128))
                .collect();
            check("b2a", got == want);
        }
    }

    let half = (fp.p / 2) as i128;
    let small: Vec<u64> = (-half..=half).map(|v| fp.reduce(Domain::Ring, v)).collect();
    let (ra, rb, rx) = every_split(&fp, Domain::Ring, &small);
    for (ls, rs, x) in ra
        .values
        .iter()
        .zip(&rb.values)
        .zip(&rx)
        .map(|((a, b), x)| (a, b, x))
    {
        let fa = ring_to_field_local(&fp, &Share::new(Domain::Ring, Role::A, vec![*ls]));
        let fb = ring_to_field_local(&fp, &Share::new(Domain::Ring, Role::B, vec![*rs]));
        let wrapped = lifted(*ls) + lifted(*rs) != lifted(*x);
        let got = reconstruct(&fa, &fb, &fp).unwrap()[0];
        if !wrapped {
            check(
                "fast ring to field without wrap",
                got == fp.reduce(Domain::Field, lifted(*x)),
            );
        }
    }
    let strict = Config {
        fixedpoint: fp.with_conversion(ConversionMode::Strict),
        ..cfg.clone()
    };
    let (sa, sb) = pair(
        &strict,
        64,
        |p| ring_to_field(p, &ra),
        |p| ring_to_field(p, &rb),
    )
    .unwrap();
    let want: Vec<u64> = rx
        .iter()
        .map(|&x| fp.reduce(Domain::Field, lifted(x)))
        .collect();
    check(
        "strict ring to field over every split",
        reconstruct(&sa, &sb, &fp).unwrap() == want,
    );
    let field: Vec<u64> = (0..fp.p).collect();
    let (fa, fb, fx) = every_split(&fp, Domain::Field, &field);
    let (ta, tb) = pair(
        &cfg,
        65,
        |p| field_to_ring(p, &fa, true),
        |p| field_to_ring(p, &fb, true),
    )
    .unwrap();
    let want: Vec<u64> = fx
        .iter()
        .map(|&x| fp.reduce(Domain::Ring, fp.lift(Domain::Field, x)))
        .collect();
    check(
        "field to ring over every split",
        reconstruct(&ta, &tb, &fp).unwrap() == want,
    );
    bad
}

fn ulp_sweeps() -> (f64, f64) {
    let cfg = Config::clear();
    let fp = cfg.fixedpoint;
    let unit = (fp.s as f64).exp2();
    let mut rng = ChaCha20Rng::seed_from_u64(66);
    let mut xs = vec![0u64];
    xs.extend(
        (0..10_000).map(|_| fp.reduce(Domain::Ring, -(rng.gen_range(0..=16 * unit as i128)))),
    );
    let (xa, xb) = split(&xs, Domain::Ring, &cfg, 66);
    let (ea, eb) = pair(
        &cfg,
        66,
        |p| rexp(p, &xa, fp.s, fp.s),
        |p| rexp(p, &xb, fp.s, fp.s),
    )
    .unwrap();
    let exp_err = reconstruct(&ea, &eb, &fp)
        .unwrap()
        .iter()
        .zip(&xs)
        .map(|(&g, &x)| (g as f64 - (fp.lift(Domain::Ring, x) as f64 / unit).exp() * unit).abs())
        .fold(0.0, f64::max);
    let sweep: Vec<u64> = (1..=1u64 << 24).step_by(997).collect();
    let (sa, sb) = split(&sweep, Domain::Ring, &cfg, 67);
    let (ia, ib) = pair(
        &cfg,
        67,
        |p| invsqrt(p, &sa, fp.s, fp.s, Domain::Ring),
        |p| invsqrt(p, &sb, fp.s, fp.s, Domain::Ring),
    )
    .unwrap();
    let inv_err = reconstruct(&ia, &ib, &fp)
        .unwrap()
        .iter()
        .zip(&sweep)
        .map(|(&g, &x)| (g as f64 - unit / (x as f64 / unit).sqrt()).abs())
        .fold(0.0, f64::max);
    (exp_err, inv_err)
}

#[test]
fn criterion_6_gadget_substrate() {
    let bad = substrate_failures();
    let (exp_err, inv_err) = ulp_sweeps();
    let ok = bad.is_empty() && exp_err <= GELU_ULPS && inv_err <= GELU_ULPS;
    let detail = format!(
        "toy k=10 p=13 failures: {}; rexp worst {exp_err:.3} ULP, invsqrt worst {inv_err:.3} ULP, limit {GELU_ULPS}",
        if bad.is_empty() { "none".into() } else { bad.join(", ") }
    );
    verdict(6, "gadget substrate", ok, &detail);
}

#[test]
fn criterion_7_toy_block() {
    let config = config(CORRECTNESS_SLOTS);
    let block = BlockConfig::toy();
    let w = BlockWeights::random(block, &mut ChaCha20Rng::seed_from_u64(70)).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(71);
    let x = Matrix::from_fn(block.d_s, block.d_m, |_, _| rng.gen_range(-1.0..1.0));
    let enc = EncodedWeights::new(&w, &config.fixedpoint).unwrap();
    let run = || {
        pair(
            &config,
            72,
            |p| infer_block(p, &block, Some(&x), None),
            |p| infer_block(p, &block, None, Some(&enc)),
        )
        .unwrap()
    };
    let (a, b) = run();
    let (a2, b2) = run();
    let got = open_real(&a.share, &b.share, config.fixedpoint.s, &config);
    let err = max_abs_diff(&got, &oracle_block(&x, &w).data);
    let deterministic = a.share == a2.share && b.share == b2.share && a.cost == a2.cost;
    let summed = a.stage_total() == a.cost && b.stage_total() == b.cost;
    let ok = err <= BLOCK_TOL && deterministic && summed;
    let detail = format!(
        "d_s=8 d_m=16 h=2 d_f=32, max error {err:.3e} <= {BLOCK_TOL}, deterministic {deterministic}, stage sum exact {summed}, {} bytes",
        a.cost.total_bytes()
    );
    verdict(7, "toy block", ok, &detail);
}

#[test]
fn criterion_8_simulated_time() {
    let wan = NetworkProfile::wan1();
    let one = CostReport::from_entries(
        &[Entry::Message {
            label: "x".into(),
            from: Role::A,
            bytes: 1_000_000,
        }],
        &wan,
    );
    let script = [
        Entry::Message {
            label: "a".into(),
            from: Role::A,
            bytes: 4_000_000,
        },
        Entry::Message {
            label: "b".into(),
            from: Role::B,
            bytes: 500_000,
        },
        Entry::Gadget {
            label: "g".into(),
            gadget: "rexp".into(),
            elements: 16_384,
            bytes: 592_000,
            rounds: 117,
            costed: true,
        },
    ];
    let scripted = CostReport::from_entries(&script, &wan);
    let analytic =
        2.0 * 0.010 + 4_500_000.0 * 8.0 / 400e6 + 117.0 * 0.010 + 592_000.0 * 8.0 / 400e6;
    let ok = one.simulated_time() == 0.030 && (scripted.simulated_time() - analytic).abs() < 1e-12;
    let detail = format!(
        "1 MB message {:.6} s, scripted transcript {:.6} s vs formula {analytic:.6} s",
        one.simulated_time(),
        scripted.simulated_time()
    );
    verdict(8, "simulated time", ok, &detail);
}
