#![allow(dead_code)]

use ptinfer::channel::Entry;
use ptinfer::fixedpoint::{decode_slice, encode_slice};
use ptinfer::party::run_pair;
use ptinfer::sharing::{reconstruct, share};
use ptinfer::{Config, Domain, Party, Result, Share};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn config(degree: usize) -> Config {
    let mut c = Config::clear();
    c.he.degree = degree;
    c
}

pub fn split(values: &[u64], domain: Domain, cfg: &Config, seed: u64) -> (Share, Share) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    share(values, domain, &cfg.fixedpoint, &mut rng).unwrap()
}

pub fn encode(xs: &[f64], cfg: &Config, domain: Domain) -> Vec<u64> {
    encode_slice(xs, cfg.fixedpoint.s, &cfg.fixedpoint, domain).unwrap()
}

pub fn open(a: &Share, b: &Share, cfg: &Config) -> Vec<u64> {
    reconstruct(a, b, &cfg.fixedpoint).unwrap()
}

pub fn open_real(a: &Share, b: &Share, scale: u32, cfg: &Config) -> Vec<f64> {
    decode_slice(&open(a, b, cfg), scale, &cfg.fixedpoint, a.domain)
}

/// Message labels in transcript order, consecutive repeats collapsed.
pub fn message_labels(p: &Party) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in p.session.transcript() {
        if let Entry::Message { label, .. } = e {
            if !label.starts_with("setup/") && out.last() != Some(label) {
                out.push(label.clone());
            }
        }
    }
    out
}

pub fn pair<TA: Send, TB: Send>(
    cfg: &Config,
    seed: u64,
    fa: impl FnOnce(&mut Party) -> Result<TA> + Send,
    fb: impl FnOnce(&mut Party) -> Result<TB> + Send,
) -> Result<(TA, TB)> {
    run_pair(cfg, seed, fa, fb)
}

pub fn softmax_rows(x: &[f64], cols: usize) -> Vec<f64> {
    x.chunks(cols)
        .flat_map(|r| {
            let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(move |v| v / s)
        })
        .collect()
}

pub fn layernorm_rows(x: &[f64], n: usize, gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    x.chunks(n)
        .flat_map(|r| {
            let mu = r.iter().sum::<f64>() / n as f64;
            let var = r.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            r.iter()
                .enumerate()
                .map(move |(j, v)| gamma[j] * (v - mu) / var.sqrt() + beta[j])
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
