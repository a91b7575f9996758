//! Byte layout shared by ciphertexts and keys.
//!
//! Header (16 bytes, little-endian): magic[4], params fingerprint u32,
//! owner key id u32, component count u16, reserved u16. The body is a flat
//! run of little-endian u64 words.

use crate::HeError;

pub const HEADER_LEN: usize = 16;

pub const MAGIC_CT_RLWE: [u8; 4] = *b"PTRC";
pub const MAGIC_CT_CLEAR: [u8; 4] = *b"PTCC";
pub const MAGIC_PK: [u8; 4] = *b"PTPK";
pub const MAGIC_RK: [u8; 4] = *b"PTRK";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub magic: [u8; 4],
    pub fingerprint: u32,
    pub owner: u32,
    pub components: u16,
}

impl Header {
    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&self.fingerprint.to_le_bytes());
        out.extend_from_slice(&self.owner.to_le_bytes());
        out.extend_from_slice(&self.components.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
    }

    pub fn read(bytes: &[u8]) -> Result<Self, HeError> {
        if bytes.len() < HEADER_LEN {
            return Err(HeError::MalformedBytes(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        let u32_at =
            |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&bytes[..4]);
        Ok(Self {
            magic,
            fingerprint: u32_at(4),
            owner: u32_at(8),
            components: u16::from_le_bytes([bytes[12], bytes[13]]),
        })
    }
}

pub fn put_words(out: &mut Vec<u8>, words: &[u64]) {
    out.reserve(words.len() * 8);
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

/// Reads `count` words starting at `offset`, rejecting any word `>= bound`.
pub fn get_words(
    bytes: &[u8],
    offset: usize,
    count: usize,
    bound: u64,
) -> Result<Vec<u64>, HeError> {
    let end = offset + count * 8;
    if bytes.len() < end {
        return Err(HeError::MalformedBytes("body truncated".into()));
    }
    bytes[offset..end]
        .chunks_exact(8)
        .map(|c| {
            let w = u64::from_le_bytes(c.try_into().unwrap_or([0; 8]));
            if w < bound {
                Ok(w)
            } else {
                Err(HeError::MalformedBytes(format!("word {w} out of range")))
            }
        })
        .collect()
}
