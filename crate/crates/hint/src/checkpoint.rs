//! Binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "HINTCKPT"
//! version  u32      1
//! then, per parameter, sorted by path, until end of file:
//!   path_len u32, path (UTF-8, path_len bytes)
//!   rank     u32, dims (u64 × rank)
//!   values   f64 × product(dims)
//! ```

use std::fs;
use std::path::Path;

use hint_core::{ParameterStore, Tensor};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HINTCKPT";
pub const VERSION: u32 = 1;

/// Serializes the parameters whose path starts with any of `prefixes`
/// (all parameters when `prefixes` is empty).
pub fn encode(store: &ParameterStore, prefixes: &[&str]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + store.num_values() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (path, _, t) in store.iter() {
        if !prefixes.is_empty() && !prefixes.iter().any(|p| path.starts_with(p)) {
            continue;
        }
        out.extend_from_slice(&(path.len() as u32).to_le_bytes());
        out.extend_from_slice(path.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Vec<(String, Tensor)>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a HINTCKPT file".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let n = r.u32()? as usize;
        let path = std::str::from_utf8(r.take(n)?)
            .map_err(|_| format!("parameter path at byte {} is not UTF-8", r.pos))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(format!("parameter `{path}` has unsupported rank {rank}"));
        }
        let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
        let len = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&l| l.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| format!("parameter `{path}` has implausible shape {dims:?}"))?;
        let raw = r.take(len * 8)?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let t = Tensor::new(dims, values).map_err(|e| format!("parameter `{path}`: {e}"))?;
        out.push((path, t));
    }
    Ok(out)
}

pub fn save(path: &Path, store: &ParameterStore, prefixes: &[&str]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(store, prefixes)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}

/// Copies every checkpoint entry into `store`; each path must exist there
/// with the same shape. Returns the number of parameters loaded.
pub fn load_into(path: &Path, store: &mut ParameterStore) -> Result<usize> {
    let entries = load(path)?;
    let n = entries.len();
    for (name, t) in entries {
        store.assign(&name, t).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    Ok(n)
}
