//! Binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GSSD"  | version: u32 | entries: u32
//! per entry: name_len: u32 | name (UTF-8) | extents: 4 x u32 | payload: f32 x prod(extents)
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"GSSD";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("entry name is not UTF-8 at offset {0}")]
    BadName(usize),
    #[error("{0} trailing bytes after last entry")]
    TrailingBytes(usize),
    #[error("checkpoint entry '{0}' missing")]
    MissingEntry(String),
    #[error("checkpoint entry '{name}' has extents {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, expected: [usize; 4], found: [usize; 4] },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub extents: [u32; 4],
    pub data: Vec<f32>,
}

impl Entry {
    pub fn shape(&self) -> [usize; 4] {
        self.extents.map(|e| e as usize)
    }
}

pub fn encode(entries: &[Entry]) -> Vec<u8> {
    let payload: usize = entries.iter().map(|e| 4 + e.name.len() + 16 + 4 * e.data.len()).sum();
    let mut out = Vec::with_capacity(12 + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        debug_assert_eq!(e.data.len(), e.extents.iter().map(|&x| x as usize).product::<usize>());
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        for x in e.extents {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for v in &e.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(CheckpointError::Truncated { offset: self.pos, needed: n, available });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Entry>, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| CheckpointError::BadName(at))?.to_owned();
        let mut extents = [0u32; 4];
        for x in &mut extents {
            *x = r.u32()?;
        }
        let numel = extents.iter().try_fold(1usize, |acc, &x| acc.checked_mul(x as usize));
        let numel = numel
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| CheckpointError::Invalid(format!("entry '{name}' extents {extents:?} overflow")))?;
        let raw = r.take(numel * 4)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        entries.push(Entry { name, extents, data });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(entries)
}

/// Hex SHA-256 of the canonical serialization.
pub fn digest(entries: &[Entry]) -> String {
    digest_bytes(&encode(entries))
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn save(path: &Path, entries: &[Entry]) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(entries))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Entry>, CheckpointError> {
    decode(&std::fs::read(path)?)
}
