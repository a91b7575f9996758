//! Framed two-party transport with byte, message, round and simulated-time
//! accounting.
//!
//! Frame: 4-byte magic, 4-byte big-endian payload length, payload.
//! Accounted frames count `payload + 8` bytes. Gadget-emulation frames and
//! the handshake travel on the same transport but are not accounted.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Role;

pub const FRAME_HEADER_LEN: u64 = 8;
const MAGIC_DATA: [u8; 4] = *b"PTF1";
const MAGIC_SEALED: [u8; 4] = *b"PTS1";
const MAGIC_HELLO: [u8; 4] = *b"PTH1";
const PS_PER_S: u128 = 1_000_000_000_000;

/// Bandwidth and one-way latency of a simulated link.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub name: String,
    /// Bits per second.
    pub bandwidth_bps: u64,
    /// One-way latency in picoseconds.
    pub latency_ps: u64,
}

impl NetworkProfile {
    pub fn new(name: impl Into<String>, bandwidth_bps: f64, latency_s: f64) -> Result<Self> {
        if !(bandwidth_bps > 0.0)
            || !(latency_s >= 0.0)
            || !bandwidth_bps.is_finite()
            || !latency_s.is_finite()
        {
            return Err(Error::Config(format!(
                "network profile needs bandwidth > 0 and latency >= 0, got {bandwidth_bps} b/s, {latency_s} s"
            )));
        }
        Ok(Self {
            name: name.into(),
            bandwidth_bps: bandwidth_bps.round() as u64,
            latency_ps: (latency_s * PS_PER_S as f64).round() as u64,
        })
    }

    /// 400 Mbps, 10 ms.
    pub fn wan1() -> Self {
        Self {
            name: "wan1".into(),
            bandwidth_bps: 400_000_000,
            latency_ps: 10_000_000_000,
        }
    }

    /// 200 Mbps, 40 ms.
    pub fn wan2() -> Self {
        Self {
            name: "wan2".into(),
            bandwidth_bps: 200_000_000,
            latency_ps: 40_000_000_000,
        }
    }

    /// 3 Gbps, 0.8 ms.
    pub fn lan() -> Self {
        Self {
            name: "lan".into(),
            bandwidth_bps: 3_000_000_000,
            latency_ps: 800_000_000,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "lan" => Ok(Self::lan()),
            "wan1" => Ok(Self::wan1()),
            "wan2" => Ok(Self::wan2()),
            other => Err(Error::Config(format!("unknown network profile {other:?}"))),
        }
    }

    pub fn latency_s(&self) -> f64 {
        self.latency_ps as f64 / PS_PER_S as f64
    }

    fn transfer_ps(&self, bytes: u64) -> u128 {
        bytes as u128 * 8 * PS_PER_S / self.bandwidth_bps as u128
    }

    /// Latency plus serialization time of one message.
    pub fn message_ps(&self, bytes: u64) -> u128 {
        self.latency_ps as u128 + self.transfer_ps(bytes)
    }

    /// `rounds` latencies plus serialization time of `bytes`.
    pub fn gadget_ps(&self, bytes: u64, rounds: u32) -> u128 {
        rounds as u128 * self.latency_ps as u128 + self.transfer_ps(bytes)
    }
}

/// One accounted event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entry {
    Message {
        label: String,
        from: Role,
        bytes: u64,
    },
    Gadget {
        label: String,
        gadget: String,
        elements: u64,
        bytes: u64,
        rounds: u32,
        costed: bool,
    },
    /// Start of an independently reported stage; the next message opens a new round.
    Boundary,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelCost {
    pub bytes: u64,
    pub messages: u64,
    pub rounds: u64,
    pub simulated_ps: u128,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CostReport {
    /// Bytes sent by A and by B, frame headers included.
    pub bytes_sent: [u64; 2],
    pub message_count: u64,
    pub round_count: u64,
    pub simulated_ps: u128,
    pub gadget_calls: u64,
    pub per_label: BTreeMap<String, LabelCost>,
    /// Gadgets charged at zero cost for lack of a cost-table entry.
    pub uncosted: BTreeSet<String>,
}

impl CostReport {
    pub fn from_entries(entries: &[Entry], profile: &NetworkProfile) -> Self {
        let mut r = CostReport::default();
        let mut last: Option<Role> = None;
        for e in entries {
            match e {
                Entry::Message { label, from, bytes } => {
                    r.bytes_sent[from.index()] += bytes;
                    r.message_count += 1;
                    let t = profile.message_ps(*bytes);
                    r.simulated_ps += t;
                    let slot = r.per_label.entry(label.clone()).or_default();
                    slot.bytes += bytes;
                    slot.messages += 1;
                    slot.simulated_ps += t;
                    if last != Some(*from) {
                        r.round_count += 1;
                        slot.rounds += 1;
                        last = Some(*from);
                    }
                }
                Entry::Gadget {
                    label,
                    gadget,
                    bytes,
                    rounds,
                    costed,
                    ..
                } => {
                    r.bytes_sent[0] += bytes / 2;
                    r.bytes_sent[1] += bytes - bytes / 2;
                    r.gadget_calls += 1;
                    let t = profile.gadget_ps(*bytes, *rounds);
                    r.simulated_ps += t;
                    r.round_count += *rounds as u64;
                    let slot = r.per_label.entry(label.clone()).or_default();
                    slot.bytes += bytes;
                    slot.rounds += *rounds as u64;
                    slot.simulated_ps += t;
                    if !costed {
                        r.uncosted.insert(gadget.clone());
                    }
                    last = None;
                }
                Entry::Boundary => last = None,
            }
        }
        r
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_sent[0] + self.bytes_sent[1]
    }

    pub fn total_mb(&self) -> f64 {
        self.total_bytes() as f64 / 1e6
    }

    pub fn simulated_time(&self) -> f64 {
        self.simulated_ps as f64 / PS_PER_S as f64
    }

    /// Field-wise sum.
    #[must_use]
    pub fn merge(&self, other: &CostReport) -> CostReport {
        let mut out = self.clone();
        out.bytes_sent[0] += other.bytes_sent[0];
        out.bytes_sent[1] += other.bytes_sent[1];
        out.message_count += other.message_count;
        out.round_count += other.round_count;
        out.simulated_ps += other.simulated_ps;
        out.gadget_calls += other.gadget_calls;
        for (k, v) in &other.per_label {
            let slot = out.per_label.entry(k.clone()).or_default();
            slot.bytes += v.bytes;
            slot.messages += v.messages;
            slot.rounds += v.rounds;
            slot.simulated_ps += v.simulated_ps;
        }
        out.uncosted.extend(other.uncosted.iter().cloned());
        out
    }

    /// Bytes of protocol messages, excluding gadget charges.
    pub fn message_bytes(&self) -> u64 {
        self.per_label
            .values()
            .filter(|v| v.messages > 0)
            .map(|v| v.bytes)
            .sum()
    }

    /// Sub-report over labels starting with `prefix`.
    pub fn bytes_with_prefix(&self, prefix: &str) -> u64 {
        self.per_label
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.bytes)
            .sum()
    }
}

/// Moves whole frames between the two parties.
pub trait Transport: Send {
    fn send_frame(&mut self, magic: [u8; 4], payload: &[u8]) -> Result<()>;
    fn recv_frame(&mut self) -> Result<([u8; 4], Vec<u8>)>;
}

/// Frames over an in-memory channel pair.
pub struct InProcess {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl InProcess {
    pub fn pair() -> (InProcess, InProcess) {
        let (ta, rb) = channel();
        let (tb, ra) = channel();
        (InProcess { tx: ta, rx: ra }, InProcess { tx: tb, rx: rb })
    }
}

fn frame_bytes(magic: [u8; 4], payload: &[u8]) -> Result<Vec<u8>> {
    let len = u32::try_from(payload.len())
        .map_err(|_| Error::Frame(format!("{} byte payload", payload.len())))?;
    let mut buf = Vec::with_capacity(payload.len() + FRAME_HEADER_LEN as usize);
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(payload);
    Ok(buf)
}

fn parse_frame(mut buf: Vec<u8>) -> Result<([u8; 4], Vec<u8>)> {
    if buf.len() < FRAME_HEADER_LEN as usize {
        return Err(Error::Frame("short frame".into()));
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&buf[..4]);
    let len = u32::from_be_bytes([buf[4], buf[5], buf[6], buf[7]]) as usize;
    if buf.len() != len + FRAME_HEADER_LEN as usize {
        return Err(Error::Frame("length prefix disagrees with frame".into()));
    }
    Ok((magic, buf.split_off(FRAME_HEADER_LEN as usize)))
}

impl Transport for InProcess {
    fn send_frame(&mut self, magic: [u8; 4], payload: &[u8]) -> Result<()> {
        self.tx
            .send(frame_bytes(magic, payload)?)
            .map_err(|_| Error::PeerClosed)
    }

    fn recv_frame(&mut self) -> Result<([u8; 4], Vec<u8>)> {
        parse_frame(self.rx.recv().map_err(|_| Error::PeerClosed)?)
    }
}

/// Frames over a TCP stream.
pub struct Tcp {
    stream: TcpStream,
}

impl Tcp {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }
}

impl Transport for Tcp {
    fn send_frame(&mut self, magic: [u8; 4], payload: &[u8]) -> Result<()> {
        self.stream.write_all(&frame_bytes(magic, payload)?)?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv_frame(&mut self) -> Result<([u8; 4], Vec<u8>)> {
        let mut header = [0u8; 8];
        if let Err(e) = self.stream.read_exact(&mut header) {
            return Err(if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::PeerClosed
            } else {
                e.into()
            });
        }
        let len = u32::from_be_bytes([header[4], header[5], header[6], header[7]]) as usize;
        let mut payload = vec![0u8; len];
        self.stream.read_exact(&mut payload)?;
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&header[..4]);
        Ok((magic, payload))
    }
}

/// Where a party finds its peer.
#[derive(Clone, Debug)]
pub enum Endpoint {
    /// Bind and accept one connection.
    Listen(String),
    /// Connect, retrying until `timeout`.
    Connect { addr: String, timeout: Duration },
}

/// One party's side of a conversation, with its accounting transcript.
pub struct Session {
    role: Role,
    transport: Box<dyn Transport>,
    profile: NetworkProfile,
    transcript: Vec<Entry>,
    real_delay: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Session({:?}, {}, {} entries)",
            self.role,
            self.profile.name,
            self.transcript.len()
        )
    }
}

impl Session {
    pub fn new(role: Role, transport: Box<dyn Transport>, profile: NetworkProfile) -> Self {
        Self {
            role,
            transport,
            profile,
            transcript: Vec::new(),
            real_delay: false,
        }
    }

    /// Two connected in-process sessions after a successful handshake.
    pub fn in_process_pair(
        profile: NetworkProfile,
        fingerprint_a: u32,
        fingerprint_b: u32,
    ) -> Result<(Session, Session)> {
        let (ta, tb) = InProcess::pair();
        let mut a = Session::new(Role::A, Box::new(ta), profile.clone());
        let mut b = Session::new(Role::B, Box::new(tb), profile);
        a.send_hello(fingerprint_a)?;
        b.send_hello(fingerprint_b)?;
        a.check_hello(fingerprint_a)?;
        b.check_hello(fingerprint_b)?;
        Ok((a, b))
    }

    /// TCP session with handshake.
    pub fn connect(
        role: Role,
        endpoint: &Endpoint,
        profile: NetworkProfile,
        fingerprint: u32,
    ) -> Result<Session> {
        let stream = match endpoint {
            Endpoint::Listen(addr) => {
                let listener = TcpListener::bind(addr)?;
                listener.accept()?.0
            }
            Endpoint::Connect { addr, timeout } => {
                let deadline = std::time::Instant::now() + *timeout;
                loop {
                    let addrs: Vec<_> = addr.to_socket_addrs()?.collect();
                    match addrs.iter().find_map(|a| TcpStream::connect(a).ok()) {
                        Some(s) => break s,
                        None if std::time::Instant::now() < deadline => {
                            std::thread::sleep(Duration::from_millis(50))
                        }
                        None => {
                            return Err(Error::Io(std::io::Error::new(
                                std::io::ErrorKind::TimedOut,
                                format!("could not reach {addr}"),
                            )))
                        }
                    }
                }
            }
        };
        let mut s = Session::new(role, Box::new(Tcp::new(stream)?), profile);
        s.send_hello(fingerprint)?;
        s.check_hello(fingerprint)?;
        Ok(s)
    }

    fn send_hello(&mut self, fingerprint: u32) -> Result<()> {
        let mut payload = fingerprint.to_le_bytes().to_vec();
        payload.push(self.role.index() as u8);
        self.transport.send_frame(MAGIC_HELLO, &payload)
    }

    fn check_hello(&mut self, fingerprint: u32) -> Result<()> {
        let (magic, payload) = self.transport.recv_frame()?;
        if magic != MAGIC_HELLO || payload.len() != 5 {
            return Err(Error::Frame("expected handshake".into()));
        }
        let peer = u32::from_le_bytes([payload[0], payload[1], payload[2], payload[3]]);
        if peer != fingerprint {
            return Err(Error::HandshakeMismatch {
                local: fingerprint,
                peer,
            });
        }
        if payload[4] as usize == self.role.index() {
            return Err(Error::RoleClash(self.role));
        }
        Ok(())
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn profile(&self) -> &NetworkProfile {
        &self.profile
    }

    pub fn set_profile(&mut self, profile: NetworkProfile) {
        self.profile = profile;
    }

    /// Sleep for each message's simulated duration.
    pub fn set_real_delay(&mut self, on: bool) {
        self.real_delay = on;
    }

    pub fn send(&mut self, label: &str, payload: &[u8]) -> Result<()> {
        let bytes = payload.len() as u64 + FRAME_HEADER_LEN;
        if self.real_delay {
            let ps = self.profile.message_ps(bytes);
            std::thread::sleep(Duration::from_nanos((ps / 1000) as u64));
        }
        self.transport.send_frame(MAGIC_DATA, payload)?;
        self.transcript.push(Entry::Message {
            label: label.to_string(),
            from: self.role,
            bytes,
        });
        Ok(())
    }

    pub fn recv(&mut self, label: &str) -> Result<Vec<u8>> {
        let (magic, payload) = self.transport.recv_frame()?;
        if magic != MAGIC_DATA {
            return Err(Error::Frame(format!(
                "{label}: expected data frame, got {magic:?}"
            )));
        }
        self.transcript.push(Entry::Message {
            label: label.to_string(),
            from: self.role.peer(),
            bytes: payload.len() as u64 + FRAME_HEADER_LEN,
        });
        Ok(payload)
    }

    /// Unaccounted frame for gadget emulation.
    pub fn send_sealed(&mut self, payload: &[u8]) -> Result<()> {
        self.transport.send_frame(MAGIC_SEALED, payload)
    }

    pub fn recv_sealed(&mut self) -> Result<Vec<u8>> {
        let (magic, payload) = self.transport.recv_frame()?;
        if magic != MAGIC_SEALED {
            return Err(Error::Frame(format!(
                "expected sealed frame, got {magic:?}"
            )));
        }
        Ok(payload)
    }

    pub fn charge_gadget(
        &mut self,
        label: &str,
        gadget: &str,
        elements: u64,
        bytes: u64,
        rounds: u32,
        costed: bool,
    ) {
        self.transcript.push(Entry::Gadget {
            label: label.to_string(),
            gadget: gadget.to_string(),
            elements,
            bytes,
            rounds,
            costed,
        });
    }

    pub fn boundary(&mut self) {
        self.transcript.push(Entry::Boundary);
    }

    pub fn checkpoint(&self) -> usize {
        self.transcript.len()
    }

    pub fn transcript(&self) -> &[Entry] {
        &self.transcript
    }

    pub fn report(&self) -> CostReport {
        CostReport::from_entries(&self.transcript, &self.profile)
    }

    pub fn report_since(&self, checkpoint: usize) -> CostReport {
        CostReport::from_entries(
            &self.transcript[checkpoint.min(self.transcript.len())..],
            &self.profile,
        )
    }
}
