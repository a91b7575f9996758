//! Seeded protocol instances shared by `party` and `bench`.
//!
//! Both parties derive the same plaintext instance from the seed and keep
//! only their own part, so a run needs no input files.

use std::time::{Duration, Instant};

use clap::ValueEnum;
use ptinfer::approx::{self, PiecewisePoly};
use ptinfer::fixedpoint::{decode_slice, encode_slice};
use ptinfer::model::{infer_block, oracle_block, BlockConfig, EncodedWeights, Matrix};
use ptinfer::party::run_pair;
use ptinfer::protocols::{
    pi_gelu_shares, pi_ln, pi_matmul, pi_softmax, GeluPlan, LnParams, MatrixShape,
};
use ptinfer::sharing::{reconstruct, share};
use ptinfer::{BlockWeights, Config, CostReport, Domain, Error, Party, Result, Role, Share};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolName {
    Matmul,
    Softmax,
    Ln,
    Gelu,
    Block,
}

impl ProtocolName {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolName::Matmul => "matmul",
            ProtocolName::Softmax => "softmax",
            ProtocolName::Ln => "ln",
            ProtocolName::Gelu => "gelu",
            ProtocolName::Block => "block",
        }
    }

    fn default_dims(self) -> &'static [usize] {
        match self {
            ProtocolName::Matmul => &[32, 32, 64],
            ProtocolName::Softmax => &[32, 32],
            ProtocolName::Ln => &[32, 64],
            ProtocolName::Gelu => &[32, 128],
            ProtocolName::Block => &[],
        }
    }
}

/// One party's result.
#[derive(Clone, Debug)]
pub struct PartyRun {
    pub share: Share,
    pub scale: u32,
    pub cost: CostReport,
    pub wall: Duration,
}

/// A protocol at a fixed shape with seeded inputs.
#[derive(Clone, Debug)]
pub struct Workload {
    pub protocol: ProtocolName,
    pub dims: Vec<usize>,
    pub block: BlockConfig,
    pub seed: u64,
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(['x', 'X'])
        .map(|t| t.trim().parse::<usize>().ok().filter(|&d| d > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Config(format!("bad shape {text:?}")))
}

fn uniform(rng: &mut ChaCha20Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl Workload {
    /// Softmax and LayerNorm take `RxC`, GeLU `RxC`, matmul `MxNxK`, block `d_sxd_mxhxd_f`.
    pub fn new(
        protocol: ProtocolName,
        shape: Option<&str>,
        config: &Config,
        seed: u64,
    ) -> Result<Self> {
        let dims = match shape {
            Some(text) => parse_dims(text)?,
            None => protocol.default_dims().to_vec(),
        };
        let mut block = config.block;
        match (protocol, dims.len()) {
            (ProtocolName::Matmul, 3) => {}
            (ProtocolName::Softmax | ProtocolName::Ln | ProtocolName::Gelu, 2) => {}
            (ProtocolName::Block, 0) => {}
            (ProtocolName::Block, 4) => {
                if dims[1] % dims[2] != 0 {
                    return Err(Error::Config(format!(
                        "{} heads do not divide d_m = {}",
                        dims[2], dims[1]
                    )));
                }
                block = BlockConfig {
                    d_s: dims[0],
                    d_m: dims[1],
                    h: dims[2],
                    d_k: dims[1] / dims[2],
                    d_f: dims[3],
                };
            }
            (p, n) => {
                return Err(Error::Config(format!(
                    "{} does not take a {n}-dimensional shape",
                    p.name()
                )))
            }
        }
        block.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            protocol,
            dims,
            block,
            seed,
        })
    }

    pub fn shape_text(&self) -> String {
        let dims: Vec<usize> = match self.protocol {
            ProtocolName::Block => {
                vec![self.block.d_s, self.block.d_m, self.block.h, self.block.d_f]
            }
            _ => self.dims.clone(),
        };
        dims.iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("x")
    }

    fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(0x1000 + stream);
        rng
    }

    /// Block weights drawn from the seed.
    pub fn random_weights(&self) -> Result<BlockWeights> {
        BlockWeights::random(self.block, &mut self.rng(3))
    }

    fn block_input(&self) -> Matrix<f64> {
        let mut rng = self.rng(1);
        let data = uniform(&mut rng, self.block.d_s * self.block.d_m, 1.0);
        Matrix::new(self.block.d_s, self.block.d_m, data).expect("sized to the block")
    }

    /// Plaintext input of the share-based protocols and its additive split.
    fn shared_input(
        &self,
        config: &Config,
        domain: Domain,
        bound: f64,
    ) -> Result<(Vec<f64>, Share, Share)> {
        let fp = &config.fixedpoint;
        let len = self.dims.iter().product();
        let real = uniform(&mut self.rng(1), len, bound);
        let encoded = encode_slice(&real, fp.s, fp, domain)?;
        let (a, b) = share(&encoded, domain, fp, &mut self.rng(2))?;
        let quantized = decode_slice(&encoded, fp.s, fp, domain);
        Ok((quantized, a, b))
    }

    fn ln_params(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rng = self.rng(3);
        let gamma = (0..n).map(|_| 1.0 + rng.gen_range(-0.2..0.2)).collect();
        let beta = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
        (gamma, beta)
    }

    /// Runs this party's side. `weights` is party B's block weights.
    pub fn run(
        &self,
        p: &mut Party,
        config: &Config,
        weights: Option<&BlockWeights>,
    ) -> Result<PartyRun> {
        let fp = config.fixedpoint;
        let start = Instant::now();
        let role = p.role;
        let pick = |a: Share, b: Share| if role == Role::A { a } else { b };
        let (share, scale, cost) = match self.protocol {
            ProtocolName::Matmul => {
                let shape = MatrixShape::new(self.dims[0], self.dims[1], self.dims[2])?;
                let (a, b) = self.matmul_inputs(config)?;
                let own = if role == Role::A { a } else { b };
                let out = pi_matmul(p, &own, shape)?;
                (out.share, out.scale, out.cost)
            }
            ProtocolName::Softmax => {
                let (_, a, b) = self.shared_input(config, Domain::Ring, 4.0)?;
                let out = pi_softmax(p, &pick(a, b), self.dims[0], self.dims[1])?;
                (out.share, out.scale, out.cost)
            }
            ProtocolName::Ln => {
                let (_, a, b) = self.shared_input(config, Domain::Ring, 1.5)?;
                let n = self.dims[1];
                let (gamma, beta) = self.ln_params(n);
                let params = LnParams::new(
                    encode_slice(&gamma, fp.s, &fp, Domain::Field)?,
                    encode_slice(&beta, fp.s, &fp, Domain::Field)?,
                )?;
                let own = pick(a, b);
                let params = (role == Role::B).then_some(&params);
                let out = pi_ln(p, &own, self.dims[0], n, params)?;
                (out.share, out.scale, out.cost)
            }
            ProtocolName::Gelu => {
                let (_, a, b) = self.shared_input(config, Domain::Field, 6.0)?;
                let out = pi_gelu_shares(p, &GeluPlan::standard(&fp), &pick(a, b))?;
                (out.share, out.scale, out.cost)
            }
            ProtocolName::Block => {
                let out = match p.role {
                    Role::A => infer_block(p, &self.block, Some(&self.block_input()), None)?,
                    Role::B => {
                        let drawn;
                        let w = match weights {
                            Some(w) => w,
                            None => {
                                drawn = self.random_weights()?;
                                &drawn
                            }
                        };
                        let enc = EncodedWeights::new(w, &fp)?;
                        infer_block(p, &self.block, None, Some(&enc))?
                    }
                };
                (out.share, fp.s, out.cost)
            }
        };
        Ok(PartyRun {
            share,
            scale,
            cost,
            wall: start.elapsed(),
        })
    }

    fn matmul_inputs(&self, config: &Config) -> Result<(Vec<u64>, Vec<u64>)> {
        let fp = &config.fixedpoint;
        let (m, n, k) = (self.dims[0], self.dims[1], self.dims[2]);
        let a = encode_slice(
            &uniform(&mut self.rng(1), m * n, 1.0),
            fp.s,
            fp,
            Domain::Field,
        )?;
        let b = encode_slice(
            &uniform(&mut self.rng(2), n * k, 1.0),
            fp.s,
            fp,
            Domain::Field,
        )?;
        Ok((a, b))
    }

    /// Double-precision reference output of the quantized instance.
    pub fn expected(&self, config: &Config, weights: Option<&BlockWeights>) -> Result<Vec<f64>> {
        let fp = &config.fixedpoint;
        match self.protocol {
            ProtocolName::Matmul => {
                let (m, n, k) = (self.dims[0], self.dims[1], self.dims[2]);
                let (a, b) = self.matmul_inputs(config)?;
                let a = Matrix::new(m, n, decode_slice(&a, fp.s, fp, Domain::Field))?;
                let b = Matrix::new(n, k, decode_slice(&b, fp.s, fp, Domain::Field))?;
                Ok(a.matmul(&b).data)
            }
            ProtocolName::Softmax => {
                let (x, _, _) = self.shared_input(config, Domain::Ring, 4.0)?;
                Ok(ptinfer::model::softmax(&Matrix::new(self.dims[0], self.dims[1], x)?).data)
            }
            ProtocolName::Ln => {
                let (x, _, _) = self.shared_input(config, Domain::Ring, 1.5)?;
                let (gamma, beta) = self.ln_params(self.dims[1]);
                let q = |v: &[f64]| -> Result<Vec<f64>> {
                    Ok(decode_slice(
                        &encode_slice(v, fp.s, fp, Domain::Field)?,
                        fp.s,
                        fp,
                        Domain::Field,
                    ))
                };
                let x = Matrix::new(self.dims[0], self.dims[1], x)?;
                Ok(ptinfer::model::layer_norm(&x, &q(&gamma)?, &q(&beta)?).data)
            }
            ProtocolName::Gelu => {
                let (x, _, _) = self.shared_input(config, Domain::Field, 6.0)?;
                let table: PiecewisePoly<f64> = approx::gelu();
                Ok(x.into_iter().map(|v| table.eval(v)).collect())
            }
            ProtocolName::Block => {
                let drawn;
                let w = match weights {
                    Some(w) => w,
                    None => {
                        drawn = self.random_weights()?;
                        &drawn
                    }
                };
                Ok(oracle_block(&self.block_input(), w).data)
            }
        }
    }
}

/// Both parties on threads over an in-process session.
pub fn run_local(
    work: &Workload,
    config: &Config,
    weights: Option<&BlockWeights>,
) -> Result<(PartyRun, PartyRun)> {
    run_pair(
        config,
        work.seed,
        |p| work.run(p, config, None),
        |p| work.run(p, config, weights),
    )
}

/// Opens two output shares as reals.
pub fn open(config: &Config, a: &PartyRun, b: &PartyRun) -> Result<Vec<f64>> {
    let raw = reconstruct(&a.share, &b.share, &config.fixedpoint)?;
    Ok(decode_slice(
        &raw,
        a.scale,
        &config.fixedpoint,
        a.share.domain,
    ))
}

pub fn max_abs_error(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}
