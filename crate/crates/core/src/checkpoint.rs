//! Versioned binary snapshot files.
//!
//! Layout: 8-byte magic, u32 format version, u64 entry count, then each entry
//! as (u32 name length, name bytes, u8 kind, u64 element count, payload),
//! and a trailing FNV-1a 64 checksum over everything before it. All integers
//! little-endian. Writes go to a sibling temp file first and are renamed into
//! place, so a crash never leaves a half-written checkpoint behind.

use crate::error::{Error, Result};
use std::path::Path;

const MAGIC: &[u8; 8] = b"SLGCKPT\0";
const VERSION: u32 = 1;

const KIND_F64: u8 = 0;
const KIND_U64: u8 = 1;
const KIND_TEXT: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum EntryData {
    F64(Vec<f64>),
    U64(Vec<u64>),
    Text(String),
}

/// An ordered collection of named entries. Order is part of the format:
/// writing the same entries in the same order produces identical bytes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, EntryData)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    fn push(&mut self, name: &str, data: EntryData) -> Result<()> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::Checkpoint(format!("duplicate entry name {name:?}")));
        }
        self.entries.push((name.to_string(), data));
        Ok(())
    }

    pub fn push_f64(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        self.push(name, EntryData::F64(values))
    }

    pub fn push_u64(&mut self, name: &str, values: Vec<u64>) -> Result<()> {
        self.push(name, EntryData::U64(values))
    }

    pub fn push_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.push(name, EntryData::Text(text.to_string()))
    }

    fn entry(&self, name: &str) -> Result<&EntryData> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry {name:?}")))
    }

    pub fn f64s(&self, name: &str) -> Result<&[f64]> {
        match self.entry(name)? {
            EntryData::F64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("entry {name:?} is not an f64 array"))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match self.entry(name)? {
            EntryData::U64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("entry {name:?} is not a u64 array"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.entry(name)? {
            EntryData::Text(s) => Ok(s),
            _ => Err(Error::Checkpoint(format!("entry {name:?} is not text"))),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn has(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (name, data) in &self.entries {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            match data {
                EntryData::F64(v) => {
                    buf.push(KIND_F64);
                    buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        buf.extend_from_slice(&x.to_bits().to_le_bytes());
                    }
                }
                EntryData::U64(v) => {
                    buf.push(KIND_U64);
                    buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        buf.extend_from_slice(&x.to_le_bytes());
                    }
                }
                EntryData::Text(s) => {
                    buf.push(KIND_TEXT);
                    buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
                    buf.extend_from_slice(s.as_bytes());
                }
            }
        }
        let sum = fnv1a(&buf);
        buf.extend_from_slice(&sum.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < MAGIC.len() + 4 + 8 + 8 {
            return Err(Error::Checkpoint("file too short for header".into()));
        }
        // checksum first: a corrupt length field must not be trusted
        let body = &bytes[..bytes.len() - 8];
        let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
        if fnv1a(body) != stored {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("format version {version}, expected {VERSION}")));
        }
        let count = r.take_u64()?;
        let mut cp = Checkpoint::new();
        for _ in 0..count {
            let name_len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("entry name is not utf-8".into()))?
                .to_string();
            let kind = r.take(1)?[0];
            let n = r.take_u64()? as usize;
            let data = match kind {
                KIND_F64 => {
                    let raw = r.take(n.checked_mul(8).ok_or_else(overflow)?)?;
                    EntryData::F64(
                        raw.chunks_exact(8)
                            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
                            .collect(),
                    )
                }
                KIND_U64 => {
                    let raw = r.take(n.checked_mul(8).ok_or_else(overflow)?)?;
                    EntryData::U64(
                        raw.chunks_exact(8)
                            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
                            .collect(),
                    )
                }
                KIND_TEXT => {
                    let raw = r.take(n)?;
                    EntryData::Text(
                        std::str::from_utf8(raw)
                            .map_err(|_| Error::Checkpoint("text entry is not utf-8".into()))?
                            .to_string(),
                    )
                }
                other => return Err(Error::Checkpoint(format!("unknown entry kind {other}"))),
            };
            cp.push(&name, data)?;
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes after last entry".into()));
        }
        Ok(cp)
    }

    /// Atomic save: write a temp file in the same directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let tmp = match dir {
            Some(d) => d.join(format!(
                ".{}.tmp",
                path.file_name().and_then(|s| s.to_str()).unwrap_or("checkpoint")
            )),
            None => Path::new(&format!(
                ".{}.tmp",
                path.file_name().and_then(|s| s.to_str()).unwrap_or("checkpoint")
            ))
            .to_path_buf(),
        };
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path)?;
        Checkpoint::from_bytes(&bytes)
    }
}

fn overflow() -> Error {
    Error::Checkpoint("entry length overflows".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        // the trailing 8 checksum bytes are not entry payload
        let end = self.pos.checked_add(n).ok_or_else(overflow)?;
        if end > self.bytes.len().saturating_sub(8) {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn take_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
