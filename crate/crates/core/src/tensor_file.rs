//! Versioned little-endian container for named `f64` tensors.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` tensor count, then per
//! tensor a `u32` name length, the UTF-8 name, a `u32` rank, `u64` dims and
//! the row-major `f64` payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        NamedTensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

pub fn encode(magic: &[u8; 8], tensors: &[NamedTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

pub fn decode(magic: &[u8; 8], buf: &[u8]) -> std::result::Result<Vec<NamedTensor>, String> {
    let mut c = Cursor { buf, pos: 0 };
    let short = || "truncated tensor file".to_string();
    if c.take(8).ok_or_else(short)? != magic {
        return Err("bad magic".into());
    }
    let version = c.u32().ok_or_else(short)?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let count = c.u32().ok_or_else(short)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = c.u32().ok_or_else(short)? as usize;
        let name = std::str::from_utf8(c.take(len).ok_or_else(short)?)
            .map_err(|e| e.to_string())?
            .to_string();
        let rank = c.u32().ok_or_else(short)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u64().ok_or_else(short)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(c.f64().ok_or_else(short)?);
        }
        out.push(NamedTensor { name, shape, data });
    }
    if c.pos != buf.len() {
        return Err("trailing bytes after last tensor".into());
    }
    Ok(out)
}

pub fn write_file(path: &Path, magic: &[u8; 8], tensors: &[NamedTensor]) -> Result<()> {
    fs::write(path, encode(magic, tensors)).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path, magic: &[u8; 8]) -> Result<Vec<NamedTensor>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(magic, &buf).map_err(|reason| Error::format(path, reason))
}

/// Finds a tensor by name and checks its shape.
pub fn take<'a>(tensors: &'a [NamedTensor], name: &str, shape: &[usize]) -> std::result::Result<&'a NamedTensor, String> {
    let t = tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| format!("missing tensor {name}"))?;
    if t.shape != shape {
        return Err(format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape));
    }
    Ok(t)
}
