//! Rotation-free BFV-style SIMD homomorphic encryption.
//!
//! Supported surface: key generation, encryption, decryption, plaintext
//! add/sub/multiply, ciphertext add/sub/multiply and squaring. There is no
//! slot rotation. Two interchangeable backends sit behind [`HeContext`]:
//! real RLWE arithmetic and a clear slot-vector twin with an identical wire
//! size.

mod clear;
pub mod modarith;
pub mod ntt;
mod params;
mod rlwe;
pub mod wire;

use std::sync::Arc;

use rand::RngCore;

pub use params::{
    Backend, HeParams, AUX_PRIME_COUNT, DEFAULT_DEGREE, Q_PRIME_BITS, Q_PRIME_COUNT,
    RELIN_DIGIT_BITS,
};

use clear::ClearEngine;
use rlwe::{Poly, RlwePublic, RlweRelin, RlweSecret};
use wire::{get_words, put_words, Header, HEADER_LEN};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum HeError {
    #[error("invalid parameters: {0}")]
    Param(String),
    #[error("key mismatch: ciphertext owner {found:#x}, key {expected:#x}")]
    KeyMismatch { expected: u32, found: u32 },
    #[error("noise budget exhausted ({budget:.1} bits left)")]
    NoiseExhausted { budget: f64 },
    #[error("ciphertext multiplication requires a relinearization key")]
    MissingRelinKey,
    #[error("malformed bytes: {0}")]
    MalformedBytes(String),
    #[error("object belongs to a different backend")]
    BackendMismatch,
    #[error("{len} slots exceed capacity {capacity}")]
    SlotOverflow { len: usize, capacity: usize },
}

pub type Result<T> = std::result::Result<T, HeError>;

/// Decryption refuses ciphertexts with less than this many bits of budget.
pub const MIN_BUDGET_BITS: f64 = 1.0;

/// A vector of `N` slots in `Z_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaintext {
    slots: Vec<u64>,
}

impl Plaintext {
    pub fn slots(&self) -> &[u64] {
        &self.slots
    }

    pub fn into_slots(self) -> Vec<u64> {
        self.slots
    }
}

#[derive(Clone)]
enum CtBody {
    Rlwe(Vec<Poly>),
    Clear { slots: Vec<u64>, budget: f64 },
}

/// A packed ciphertext tagged with the id of the key that encrypted it.
#[derive(Clone)]
pub struct Ciphertext {
    owner: u32,
    body: CtBody,
}

impl Ciphertext {
    pub fn owner(&self) -> u32 {
        self.owner
    }
}

impl std::fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.body {
            CtBody::Rlwe(_) => "rlwe",
            CtBody::Clear { .. } => "clear",
        };
        write!(f, "Ciphertext({kind}, owner {:#x})", self.owner)
    }
}

#[derive(Clone)]
enum SecretBody {
    Rlwe(Arc<RlweSecret>),
    Clear,
}

#[derive(Clone)]
enum PublicBody {
    Rlwe(Arc<RlwePublic>),
    Clear,
}

#[derive(Clone)]
enum RelinBody {
    Rlwe(Arc<RlweRelin>),
    Clear,
}

#[derive(Clone)]
pub struct SecretKey {
    id: u32,
    body: SecretBody,
}

#[derive(Clone)]
pub struct PublicKey {
    id: u32,
    body: PublicBody,
}

#[derive(Clone)]
pub struct RelinKey {
    id: u32,
    body: RelinBody,
}

macro_rules! key_id {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn id(&self) -> u32 {
                self.id
            }
        }
        impl std::fmt::Debug for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}({:#x})", stringify!($t), self.id)
            }
        }
    )*};
}
key_id!(SecretKey, PublicKey, RelinKey);

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: Option<RelinKey>,
}

#[derive(Clone)]
enum Engine {
    Rlwe(Arc<rlwe::RlweEngine>),
    Clear(ClearEngine),
}

/// Parameters plus precomputed tables; cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct HeContext {
    params: HeParams,
    fingerprint: u32,
    engine: Engine,
}

impl std::fmt::Debug for HeContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "HeContext({}, N={}, p={})",
            self.params.backend.name(),
            self.params.n,
            self.params.p
        )
    }
}

impl HeContext {
    pub fn new(params: HeParams) -> Result<Self> {
        let check = HeParams::new(params.n, params.p, params.backend)?;
        if check.q != params.q || check.aux != params.aux {
            return Err(HeError::Param("non-standard modulus chain".into()));
        }
        let engine = match params.backend {
            Backend::Rlwe => Engine::Rlwe(Arc::new(rlwe::RlweEngine::new(&params)?)),
            Backend::Clear => Engine::Clear(ClearEngine { p: params.p }),
        };
        Ok(Self {
            fingerprint: params.fingerprint(),
            params,
            engine,
        })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn slots(&self) -> usize {
        self.params.n
    }

    pub fn plain_modulus(&self) -> u64 {
        self.params.p
    }

    pub fn fingerprint(&self) -> u32 {
        self.fingerprint
    }

    /// Bytes of one serialized ciphertext.
    pub fn ciphertext_bytes(&self) -> usize {
        self.params.ciphertext_bytes()
    }

    /// Pads `values` with zeros to `N` slots and reduces them mod `p`.
    pub fn plaintext(&self, values: &[u64]) -> Result<Plaintext> {
        if values.len() > self.params.n {
            return Err(HeError::SlotOverflow {
                len: values.len(),
                capacity: self.params.n,
            });
        }
        let mut slots: Vec<u64> = values.iter().map(|&v| v % self.params.p).collect();
        slots.resize(self.params.n, 0);
        Ok(Plaintext { slots })
    }

    pub fn keygen<R: RngCore + ?Sized>(&self, rng: &mut R) -> KeyPair {
        self.keygen_with(rng, true)
    }

    pub fn keygen_with<R: RngCore + ?Sized>(&self, rng: &mut R, with_relin: bool) -> KeyPair {
        let id = loop {
            let v = rng.next_u32();
            if v != 0 {
                break v;
            }
        };
        match &self.engine {
            Engine::Rlwe(e) => {
                let (s, p, r) = e.keygen(rng, with_relin);
                KeyPair {
                    secret: SecretKey {
                        id,
                        body: SecretBody::Rlwe(Arc::new(s)),
                    },
                    public: PublicKey {
                        id,
                        body: PublicBody::Rlwe(Arc::new(p)),
                    },
                    relin: r.map(|r| RelinKey {
                        id,
                        body: RelinBody::Rlwe(Arc::new(r)),
                    }),
                }
            }
            Engine::Clear(_) => KeyPair {
                secret: SecretKey {
                    id,
                    body: SecretBody::Clear,
                },
                public: PublicKey {
                    id,
                    body: PublicBody::Clear,
                },
                relin: with_relin.then_some(RelinKey {
                    id,
                    body: RelinBody::Clear,
                }),
            },
        }
    }

    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        pk: &PublicKey,
        pt: &Plaintext,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let body = match (&self.engine, &pk.body) {
            (Engine::Rlwe(e), PublicBody::Rlwe(k)) => CtBody::Rlwe(e.encrypt(k, &pt.slots, rng)),
            (Engine::Clear(_), PublicBody::Clear) => CtBody::Clear {
                slots: pt.slots.clone(),
                budget: clear::FRESH_BUDGET,
            },
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext { owner: pk.id, body })
    }

    /// Remaining noise budget in bits.
    pub fn noise_budget(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<f64> {
        Ok(self.decrypt_raw(sk, ct)?.1)
    }

    fn decrypt_raw(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<(Vec<u64>, f64)> {
        if sk.id != ct.owner {
            return Err(HeError::KeyMismatch {
                expected: sk.id,
                found: ct.owner,
            });
        }
        match (&self.engine, &sk.body, &ct.body) {
            (Engine::Rlwe(e), SecretBody::Rlwe(k), CtBody::Rlwe(c)) => Ok(e.decrypt(k, c)),
            (Engine::Clear(_), SecretBody::Clear, CtBody::Clear { slots, budget }) => {
                Ok((slots.clone(), *budget))
            }
            _ => Err(HeError::BackendMismatch),
        }
    }

    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
        let (slots, budget) = self.decrypt_raw(sk, ct)?;
        if budget < MIN_BUDGET_BITS {
            return Err(HeError::NoiseExhausted { budget });
        }
        Ok(Plaintext { slots })
    }

    fn same_owner(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        if a.owner != b.owner {
            return Err(HeError::KeyMismatch {
                expected: a.owner,
                found: b.owner,
            });
        }
        Ok(())
    }

    fn binary(
        &self,
        a: &Ciphertext,
        b: &Ciphertext,
        rlwe_op: impl Fn(&rlwe::RlweEngine, &[Poly], &[Poly]) -> Vec<Poly>,
        clear_op: impl Fn(&ClearEngine, &[u64], &[u64]) -> Vec<u64>,
    ) -> Result<Ciphertext> {
        Self::same_owner(a, b)?;
        let body = match (&self.engine, &a.body, &b.body) {
            (Engine::Rlwe(e), CtBody::Rlwe(x), CtBody::Rlwe(y)) => CtBody::Rlwe(rlwe_op(e, x, y)),
            (
                Engine::Clear(e),
                CtBody::Clear {
                    slots: x,
                    budget: bx,
                },
                CtBody::Clear {
                    slots: y,
                    budget: by,
                },
            ) => CtBody::Clear {
                slots: clear_op(e, x, y),
                budget: clear::sum_budget(*bx, *by),
            },
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext {
            owner: a.owner,
            body,
        })
    }

    fn with_plain(
        &self,
        a: &Ciphertext,
        pt: &Plaintext,
        rlwe_op: impl Fn(&rlwe::RlweEngine, &[Poly], &[u64]) -> Vec<Poly>,
        clear_op: impl Fn(&ClearEngine, &[u64], &[u64]) -> Vec<u64>,
        cost: f64,
    ) -> Result<Ciphertext> {
        let body = match (&self.engine, &a.body) {
            (Engine::Rlwe(e), CtBody::Rlwe(x)) => CtBody::Rlwe(rlwe_op(e, x, &pt.slots)),
            (Engine::Clear(e), CtBody::Clear { slots, budget }) => CtBody::Clear {
                slots: clear_op(e, slots, &pt.slots),
                budget: budget - cost,
            },
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext {
            owner: a.owner,
            body,
        })
    }

    pub fn add_pt(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.with_plain(
            a,
            pt,
            |e, x, m| e.add_plain(x, m),
            |e, x, m| e.add(x, m),
            0.0,
        )
    }

    pub fn sub_pt(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.with_plain(
            a,
            pt,
            |e, x, m| e.sub_plain(x, m),
            |e, x, m| e.sub(x, m),
            0.0,
        )
    }

    pub fn mul_pt(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.with_plain(
            a,
            pt,
            |e, x, m| e.mul_plain(x, m),
            |e, x, m| e.mul(x, m),
            clear::MUL_PLAIN_COST,
        )
    }

    pub fn add_ct(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.binary(a, b, |e, x, y| e.add(x, y), |e, x, y| e.add(x, y))
    }

    pub fn sub_ct(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.binary(a, b, |e, x, y| e.sub(x, y), |e, x, y| e.sub(x, y))
    }

    fn relin_for<'a>(&self, rlk: Option<&'a RelinKey>, owner: u32) -> Result<&'a RelinKey> {
        let rlk = rlk.ok_or(HeError::MissingRelinKey)?;
        if rlk.id != owner {
            return Err(HeError::KeyMismatch {
                expected: rlk.id,
                found: owner,
            });
        }
        Ok(rlk)
    }

    pub fn mul_ct(
        &self,
        rlk: Option<&RelinKey>,
        a: &Ciphertext,
        b: &Ciphertext,
    ) -> Result<Ciphertext> {
        Self::same_owner(a, b)?;
        let rlk = self.relin_for(rlk, a.owner)?;
        let body = match (&self.engine, &rlk.body, &a.body, &b.body) {
            (Engine::Rlwe(e), RelinBody::Rlwe(k), CtBody::Rlwe(x), CtBody::Rlwe(y)) => {
                CtBody::Rlwe(e.mul(x, y, k))
            }
            (
                Engine::Clear(e),
                RelinBody::Clear,
                CtBody::Clear {
                    slots: x,
                    budget: bx,
                },
                CtBody::Clear {
                    slots: y,
                    budget: by,
                },
            ) => CtBody::Clear {
                slots: e.mul(x, y),
                budget: bx.min(*by) - clear::MUL_CT_COST,
            },
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext {
            owner: a.owner,
            body,
        })
    }

    pub fn square(&self, rlk: Option<&RelinKey>, a: &Ciphertext) -> Result<Ciphertext> {
        let rlk = self.relin_for(rlk, a.owner)?;
        let body = match (&self.engine, &rlk.body, &a.body) {
            (Engine::Rlwe(e), RelinBody::Rlwe(k), CtBody::Rlwe(x)) => CtBody::Rlwe(e.square(x, k)),
            (Engine::Clear(e), RelinBody::Clear, CtBody::Clear { slots, budget }) => {
                CtBody::Clear {
                    slots: e.mul(slots, slots),
                    budget: budget - clear::MUL_CT_COST,
                }
            }
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext {
            owner: a.owner,
            body,
        })
    }

    fn words_per_component(&self) -> usize {
        self.params.q.len() * self.params.n
    }

    pub fn serialize_ct(&self, ct: &Ciphertext) -> Vec<u8> {
        let body_words = 2 * self.words_per_component();
        let mut out = Vec::with_capacity(HEADER_LEN + body_words * 8);
        match &ct.body {
            CtBody::Rlwe(polys) => {
                Header {
                    magic: wire::MAGIC_CT_RLWE,
                    fingerprint: self.fingerprint,
                    owner: ct.owner,
                    components: polys.len() as u16,
                }
                .write(&mut out);
                for poly in polys {
                    for limb in poly {
                        put_words(&mut out, limb);
                    }
                }
            }
            CtBody::Clear { slots, budget } => {
                Header {
                    magic: wire::MAGIC_CT_CLEAR,
                    fingerprint: self.fingerprint,
                    owner: ct.owner,
                    components: 2,
                }
                .write(&mut out);
                put_words(&mut out, slots);
                put_words(&mut out, &[budget.to_bits()]);
                out.resize(HEADER_LEN + body_words * 8, 0);
            }
        }
        out
    }

    fn check_header(&self, bytes: &[u8], magic: [u8; 4]) -> Result<Header> {
        let h = Header::read(bytes)?;
        if h.magic != magic {
            return Err(HeError::MalformedBytes(format!(
                "unexpected magic {:?}",
                h.magic
            )));
        }
        if h.fingerprint != self.fingerprint {
            return Err(HeError::MalformedBytes(format!(
                "parameter fingerprint {:#x} differs from {:#x}",
                h.fingerprint, self.fingerprint
            )));
        }
        Ok(h)
    }

    fn read_polys(&self, bytes: &[u8], count: usize) -> Result<Vec<Poly>> {
        let n = self.params.n;
        let expected = HEADER_LEN + count * self.words_per_component() * 8;
        if bytes.len() != expected {
            return Err(HeError::MalformedBytes(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut offset = HEADER_LEN;
        let mut polys = Vec::with_capacity(count);
        for _ in 0..count {
            let mut poly = Vec::with_capacity(self.params.q.len());
            for &m in &self.params.q {
                poly.push(get_words(bytes, offset, n, m)?);
                offset += n * 8;
            }
            polys.push(poly);
        }
        Ok(polys)
    }

    pub fn deserialize_ct(&self, bytes: &[u8]) -> Result<Ciphertext> {
        match &self.engine {
            Engine::Rlwe(_) => {
                let h = self.check_header(bytes, wire::MAGIC_CT_RLWE)?;
                if h.components != 2 {
                    return Err(HeError::MalformedBytes(format!(
                        "{} components",
                        h.components
                    )));
                }
                let polys = self.read_polys(bytes, 2)?;
                Ok(Ciphertext {
                    owner: h.owner,
                    body: CtBody::Rlwe(polys),
                })
            }
            Engine::Clear(_) => {
                let h = self.check_header(bytes, wire::MAGIC_CT_CLEAR)?;
                let expected = self.ciphertext_bytes();
                if bytes.len() != expected || h.components != 2 {
                    return Err(HeError::MalformedBytes(format!(
                        "expected {expected} bytes, found {}",
                        bytes.len()
                    )));
                }
                let slots = get_words(bytes, HEADER_LEN, self.params.n, self.params.p)?;
                let budget = f64::from_bits(
                    get_words(bytes, HEADER_LEN + self.params.n * 8, 1, u64::MAX)?[0],
                );
                Ok(Ciphertext {
                    owner: h.owner,
                    body: CtBody::Clear { slots, budget },
                })
            }
        }
    }

    pub fn serialize_public(&self, pk: &PublicKey) -> Vec<u8> {
        let mut out = Vec::new();
        let polys: Vec<&Poly> = match &pk.body {
            PublicBody::Rlwe(k) => vec![&k.b, &k.a],
            PublicBody::Clear => Vec::new(),
        };
        Header {
            magic: wire::MAGIC_PK,
            fingerprint: self.fingerprint,
            owner: pk.id,
            components: polys.len() as u16,
        }
        .write(&mut out);
        for poly in polys {
            for limb in poly {
                put_words(&mut out, limb);
            }
        }
        out
    }

    pub fn deserialize_public(&self, bytes: &[u8]) -> Result<PublicKey> {
        let h = self.check_header(bytes, wire::MAGIC_PK)?;
        let body = match &self.engine {
            Engine::Rlwe(_) => {
                let mut polys = self.read_polys(bytes, 2)?;
                let a = polys.pop().unwrap_or_default();
                let b = polys.pop().unwrap_or_default();
                PublicBody::Rlwe(Arc::new(RlwePublic { b, a }))
            }
            Engine::Clear(_) => {
                if bytes.len() != HEADER_LEN {
                    return Err(HeError::MalformedBytes(
                        "clear public key carries a body".into(),
                    ));
                }
                PublicBody::Clear
            }
        };
        Ok(PublicKey { id: h.owner, body })
    }

    pub fn serialize_relin(&self, rk: &RelinKey) -> Vec<u8> {
        let mut out = Vec::new();
        let polys: Vec<&Poly> = match &rk.body {
            RelinBody::Rlwe(k) => k.keys.iter().flat_map(|(b, a)| [b, a]).collect(),
            RelinBody::Clear => Vec::new(),
        };
        Header {
            magic: wire::MAGIC_RK,
            fingerprint: self.fingerprint,
            owner: rk.id,
            components: polys.len() as u16,
        }
        .write(&mut out);
        for poly in polys {
            for limb in poly {
                put_words(&mut out, limb);
            }
        }
        out
    }

    pub fn deserialize_relin(&self, bytes: &[u8]) -> Result<RelinKey> {
        let h = self.check_header(bytes, wire::MAGIC_RK)?;
        let body = match &self.engine {
            Engine::Rlwe(_) => {
                let count = 2 * self.params.q.len() * self.params.digits_per_limb();
                if h.components as usize != count {
                    return Err(HeError::MalformedBytes(format!(
                        "{} relinearization components",
                        h.components
                    )));
                }
                let polys = self.read_polys(bytes, count)?;
                let mut keys = Vec::with_capacity(count / 2);
                let mut it = polys.into_iter();
                while let (Some(b), Some(a)) = (it.next(), it.next()) {
                    keys.push((b, a));
                }
                RelinBody::Rlwe(Arc::new(RlweRelin { keys }))
            }
            Engine::Clear(_) => {
                if bytes.len() != HEADER_LEN {
                    return Err(HeError::MalformedBytes(
                        "clear relinearization key carries a body".into(),
                    ));
                }
                RelinBody::Clear
            }
        };
        Ok(RelinKey { id: h.owner, body })
    }
}
