//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `FNMR`, u32 version, u32 record count, then
//! per record: u32 name length, UTF-8 name, u32 rank, rank × u32 extents,
//! numel × f64 payload. Records follow parameter id order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"FNMR";
pub const VERSION: u32 = 1;

pub fn encode(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, p) in store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.tensor.shape().len() as u32).to_le_bytes());
        for &e in p.tensor.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in p.tensor.data() {
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
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|e| e as usize)).collect::<Result<_>>()?;
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("extent overflow".into()))?)?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        records.push((name, Tensor::new(&shape, data).map_err(|e| Error::Format(e.to_string()))?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint records".into()));
    }
    Ok(records)
}

/// Overwrites `store` values from decoded records. Names and shapes must
/// match the store exactly, in order.
pub fn apply(store: &mut ParamStore, records: &[(String, Tensor)]) -> Result<()> {
    if records.len() != store.len() {
        return Err(Error::Format(format!("checkpoint has {} tensors, model expects {}", records.len(), store.len())));
    }
    for ((_, p), (name, t)) in store.iter().zip(records) {
        if &p.name != name || p.tensor.shape() != t.shape() {
            return Err(Error::Format(format!(
                "checkpoint tensor `{name}` {:?} does not match model tensor `{}` {:?}",
                t.shape(),
                p.name,
                p.tensor.shape()
            )));
        }
    }
    for ((_, p), (_, t)) in store.iter_mut().zip(records) {
        p.tensor = t.clone();
    }
    Ok(())
}

pub fn save(path: &Path, store: &ParamStore) -> Result<()> {
    fs::write(path, encode(store))?;
    Ok(())
}

pub fn load_into(path: &Path, store: &mut ParamStore) -> Result<()> {
    let bytes = fs::read(path)?;
    apply(store, &decode(&bytes)?)
}
