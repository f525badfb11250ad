//! Versioned binary container used for every persisted artifact.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes   b"SETC" (corpus artifacts) or b"SETM" (encoder models)
//! version    u32
//! sections   repeated until EOF:
//!              tag     4 bytes ASCII
//!              length  u64 (payload bytes)
//!              payload
//! ```
//!
//! Section payloads are built with [`ByteWriter`] and parsed with
//! [`ByteReader`]; unknown tags are preserved and ignored by readers.

use std::path::Path;

use crate::error::{Error, Result};

pub const CORPUS_MAGIC: [u8; 4] = *b"SETC";
pub const MODEL_MAGIC: [u8; 4] = *b"SETM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub magic: [u8; 4],
    pub version: u32,
    sections: Vec<([u8; 4], Vec<u8>)>,
}

impl Container {
    pub fn new(magic: [u8; 4]) -> Self {
        Container {
            magic,
            version: FORMAT_VERSION,
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, tag: &[u8; 4], payload: Vec<u8>) {
        self.sections.push((*tag, payload));
    }

    pub fn section(&self, tag: &[u8; 4]) -> Option<&[u8]> {
        self.sections
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, p)| p.as_slice())
    }

    pub fn require(&self, tag: &[u8; 4]) -> Result<&[u8]> {
        self.section(tag).ok_or_else(|| {
            Error::Format(format!(
                "missing section {:?}",
                String::from_utf8_lossy(tag)
            ))
        })
    }

    pub fn tags(&self) -> impl Iterator<Item = &[u8; 4]> {
        self.sections.iter().map(|(t, _)| t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let total: usize = self.sections.iter().map(|(_, p)| 12 + p.len()).sum();
        let mut out = Vec::with_capacity(8 + total);
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&self.version.to_le_bytes());
        for (tag, payload) in &self.sections {
            out.extend_from_slice(tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], expected_magic: [u8; 4]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic: [u8; 4] = r.array()?;
        if magic != expected_magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(&expected_magic)
            )));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version}"
            )));
        }
        let mut sections = Vec::new();
        while !r.is_empty() {
            let tag: [u8; 4] = r.array()?;
            let len = r.u64()? as usize;
            sections.push((tag, r.bytes(len)?.to_vec()));
        }
        Ok(Container {
            magic,
            version,
            sections,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: &Path, expected_magic: [u8; 4]) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, expected_magic)
    }
}

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn u32_slice(&mut self, v: &[u32]) -> &mut Self {
        self.u64(v.len() as u64);
        for x in v {
            self.u32(*x);
        }
        self
    }

    pub fn u64_slice(&mut self, v: &[u64]) -> &mut Self {
        self.u64(v.len() as u64);
        for x in v {
            self.u64(*x);
        }
        self
    }

    pub fn f64_slice(&mut self, v: &[f64]) -> &mut Self {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
        self
    }

    pub fn strings(&mut self, v: &[String]) -> &mut Self {
        self.u64(v.len() as u64);
        for s in v {
            self.str(s);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.bytes(N)?.try_into().expect("length checked"))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(Error::Format(format!("length prefix {n} exceeds data")));
        }
        Ok(n)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        String::from_utf8(self.bytes(n)?.to_vec())
            .map_err(|e| Error::Format(format!("invalid utf-8: {e}")))
    }

    pub fn u32_vec(&mut self) -> Result<Vec<u32>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }

    pub fn u64_vec(&mut self) -> Result<Vec<u64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64()).collect()
    }

    pub fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.str()).collect()
    }
}
