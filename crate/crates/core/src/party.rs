//! Per-party protocol state: keys, session, randomness and step labels.

use ptinfer_he::{Ciphertext, HeContext, KeyPair, PublicKey, RelinKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{CostReport, Session};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fixedpoint::{Domain, FixedPointConfig};
use crate::sharing::{GadgetProvider, Share};
use crate::Role;

/// Everything one party needs to run protocols against its peer.
pub struct Party {
    pub role: Role,
    pub cfg: FixedPointConfig,
    pub he: HeContext,
    pub keys: KeyPair,
    pub peer_pk: PublicKey,
    pub peer_rlk: Option<RelinKey>,
    pub session: Session,
    pub gadgets: GadgetProvider,
    pub rng: ChaCha20Rng,
    pub max_variance: f64,
    scope: Vec<String>,
}

impl std::fmt::Debug for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Party({:?}, {:?})", self.role, self.session)
    }
}

impl Party {
    /// Generates keys and exchanges public and relinearization keys under `setup/keys`.
    pub fn setup(config: &Config, he: HeContext, mut session: Session, seed: u64) -> Result<Party> {
        let role = session.role();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(role.index() as u64 + 1);
        let keys = he.keygen(&mut rng);
        let mut payload = he.serialize_public(&keys.public);
        let rlk = keys
            .relin
            .as_ref()
            .expect("keygen includes a relinearization key");
        payload.extend_from_slice(&he.serialize_relin(rlk));
        let pk_len = he.serialize_public(&keys.public).len();
        let incoming = match role {
            Role::A => {
                session.send("setup/keys", &payload)?;
                session.recv("setup/keys")?
            }
            Role::B => {
                let got = session.recv("setup/keys")?;
                session.send("setup/keys", &payload)?;
                got
            }
        };
        if incoming.len() < pk_len {
            return Err(Error::Frame("short key bundle".into()));
        }
        let peer_pk = he.deserialize_public(&incoming[..pk_len])?;
        let peer_rlk = Some(he.deserialize_relin(&incoming[pk_len..])?);
        session.set_real_delay(config.network.real_delay);
        Ok(Party {
            role,
            cfg: config.fixedpoint,
            he,
            keys,
            peer_pk,
            peer_rlk,
            session,
            gadgets: GadgetProvider::new(config.gadgets.backend, config.gadgets.costs.clone()),
            rng,
            max_variance: config.layernorm.max_variance,
            scope: Vec::new(),
        })
    }

    /// Full label for a step inside the current scope.
    pub fn label(&self, step: &str) -> String {
        if self.scope.is_empty() {
            step.to_string()
        } else {
            format!("{}/{}", self.scope.join("/"), step)
        }
    }

    /// Runs `f` under a nested label scope and returns its cost slice.
    pub fn scoped<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Party) -> Result<T>,
    ) -> Result<(T, CostReport)> {
        self.session.boundary();
        let cp = self.session.checkpoint();
        self.scope.push(name.to_string());
        let out = f(self);
        self.scope.pop();
        Ok((out?, self.session.report_since(cp)))
    }

    /// Number of ciphertexts holding `len` slots.
    pub fn ct_count(&self, len: usize) -> usize {
        len.div_ceil(self.he.slots()).max(1)
    }

    /// Encrypts field elements under this party's key, `N` per ciphertext.
    pub fn encrypt(&mut self, values: &[u64]) -> Result<Vec<Ciphertext>> {
        let n = self.he.slots();
        let count = self.ct_count(values.len());
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let chunk = &values[(i * n).min(values.len())..((i + 1) * n).min(values.len())];
            let pt = self.he.plaintext(chunk)?;
            out.push(self.he.encrypt(&self.keys.public, &pt, &mut self.rng)?);
        }
        Ok(out)
    }

    /// Decrypts own ciphertexts and keeps the first `len` slots.
    pub fn decrypt(&self, cts: &[Ciphertext], len: usize) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(cts.len() * self.he.slots());
        for ct in cts {
            out.extend(self.he.decrypt(&self.keys.secret, ct)?.into_slots());
        }
        if out.len() < len {
            return Err(Error::ShapeMismatch(format!(
                "{} slots decrypted, {len} expected",
                out.len()
            )));
        }
        out.truncate(len);
        Ok(out)
    }

    /// Splits `values` into plaintext chunks aligned with [`Party::encrypt`].
    pub fn plaintexts(&self, values: &[u64]) -> Result<Vec<ptinfer_he::Plaintext>> {
        let n = self.he.slots();
        (0..self.ct_count(values.len()))
            .map(|i| {
                let chunk = &values[(i * n).min(values.len())..((i + 1) * n).min(values.len())];
                Ok(self.he.plaintext(chunk)?)
            })
            .collect()
    }

    /// Receives `count` own ciphertexts and decrypts the first `len` slots.
    pub fn recv_decrypt(&mut self, step: &str, count: usize, len: usize) -> Result<Vec<u64>> {
        let cts = self.recv_cts(step, count)?;
        self.decrypt(&cts, len)
    }

    /// Sends a group of ciphertexts as one frame.
    pub fn send_cts(&mut self, step: &str, cts: &[Ciphertext]) -> Result<()> {
        let mut buf = Vec::with_capacity(cts.len() * self.he.ciphertext_bytes());
        for ct in cts {
            buf.extend_from_slice(&self.he.serialize_ct(ct));
        }
        let label = self.label(step);
        self.session.send(&label, &buf)
    }

    pub fn recv_cts(&mut self, step: &str, count: usize) -> Result<Vec<Ciphertext>> {
        let label = self.label(step);
        let buf = self.session.recv(&label)?;
        let size = self.he.ciphertext_bytes();
        if buf.len() != count * size {
            return Err(Error::Frame(format!(
                "{label}: {} bytes, expected {count} ciphertexts of {size}",
                buf.len()
            )));
        }
        buf.chunks(size)
            .map(|c| Ok(self.he.deserialize_ct(c)?))
            .collect()
    }

    /// Sends domain elements packed at 4 bytes (field, bool) or 8 bytes (ring).
    pub fn send_elems(&mut self, step: &str, domain: Domain, values: &[u64]) -> Result<()> {
        let mut buf = Vec::with_capacity(values.len() * 8);
        for &v in values {
            match domain {
                Domain::Ring => buf.extend_from_slice(&v.to_le_bytes()),
                _ => buf.extend_from_slice(&(v as u32).to_le_bytes()),
            }
        }
        let label = self.label(step);
        self.session.send(&label, &buf)
    }

    pub fn recv_elems(&mut self, step: &str, domain: Domain, len: usize) -> Result<Vec<u64>> {
        let label = self.label(step);
        let buf = self.session.recv(&label)?;
        let width = if domain == Domain::Ring { 8 } else { 4 };
        if buf.len() != len * width {
            return Err(Error::Frame(format!(
                "{label}: {} bytes for {len} elements",
                buf.len()
            )));
        }
        let m = self.cfg.modulus(domain);
        buf.chunks(width)
            .map(|c| {
                let mut w = [0u8; 8];
                w[..width].copy_from_slice(c);
                let v = u64::from_le_bytes(w);
                if v as u128 >= m {
                    return Err(Error::Frame(format!(
                        "{label}: element {v} outside {domain:?}"
                    )));
                }
                Ok(v)
            })
            .collect()
    }

    /// Relinearization key matching the owner of `ct`.
    pub fn relin_for(&self, ct: &Ciphertext) -> Option<&RelinKey> {
        if ct.owner() == self.keys.public.id() {
            self.keys.relin.as_ref()
        } else {
            self.peer_rlk.as_ref()
        }
    }

    /// Public constant shared as (value, 0).
    pub fn public(&self, domain: Domain, values: &[u64]) -> Share {
        Share::public(domain, self.role, values)
    }
}

/// Runs `fa` as party A and `fb` as party B over an in-process session pair.
pub fn run_pair<TA, TB, FA, FB>(config: &Config, seed: u64, fa: FA, fb: FB) -> Result<(TA, TB)>
where
    TA: Send,
    TB: Send,
    FA: FnOnce(&mut Party) -> Result<TA> + Send,
    FB: FnOnce(&mut Party) -> Result<TB> + Send,
{
    let he = config.he_context()?;
    let fp = config.fingerprint()?;
    let (sa, sb) = Session::in_process_pair(config.profile()?, fp, fp)?;
    let (ra, rb) = std::thread::scope(|scope| {
        let he_b = he.clone();
        let hb = scope.spawn(move || {
            let mut p = Party::setup(config, he_b, sb, seed)?;
            fb(&mut p)
        });
        let ra = Party::setup(config, he, sa, seed).and_then(|mut p| fa(&mut p));
        (ra, hb.join().expect("party B panicked"))
    });
    match (ra, rb) {
        (Ok(a), Ok(b)) => Ok((a, b)),
        (Err(e), Err(Error::PeerClosed)) | (Err(e), Ok(_)) => Err(e),
        (_, Err(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_exchanges_keys() {
        let cfg = Config::clear();
        let (a, b) = run_pair(
            &cfg,
            1,
            |p| Ok((p.keys.public.id(), p.peer_pk.id())),
            |p| Ok((p.keys.public.id(), p.peer_pk.id())),
        )
        .unwrap();
        assert_eq!(a.0, b.1);
        assert_eq!(a.1, b.0);
        assert_ne!(a.0, b.0);
    }

    #[test]
    fn ciphertext_groups_roundtrip() {
        let cfg = Config::clear();
        let n = cfg.he.degree;
        let (got, _) = run_pair(
            &cfg,
            2,
            move |p| Ok(p.recv_cts("x", 2)?.len()),
            move |p| {
                let vals: Vec<u64> = (0..n as u64 + 5).collect();
                let cts = p.encrypt(&vals)?;
                assert_eq!(p.decrypt(&cts, vals.len())?, vals);
                p.send_cts("x", &cts)
            },
        )
        .unwrap();
        assert_eq!(got, 2);
    }

    #[test]
    fn element_frames_check_domain() {
        let cfg = Config::clear();
        let (got, _) = run_pair(
            &cfg,
            3,
            |p| p.recv_elems("e", Domain::Field, 3),
            |p| p.send_elems("e", Domain::Field, &[1, 2, 3]),
        )
        .unwrap();
        assert_eq!(got, vec![1, 2, 3]);
        let err = run_pair(
            &cfg,
            3,
            |p| p.recv_elems("e", Domain::Field, 1),
            |p| p.send_elems("e", Domain::Ring, &[u64::MAX >> 30]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn scoped_labels_nest() {
        let cfg = Config::clear();
        let (la, _) = run_pair(
            &cfg,
            4,
            |p| {
                let (l, _) = p.scoped("outer", |p| {
                    Ok(p.scoped("inner", |p| Ok(p.label("step")))?.0)
                })?;
                Ok(l)
            },
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(la, "outer/inner/step");
    }
}
