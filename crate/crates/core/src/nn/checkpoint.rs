//! Single-file parameter checkpoints.
//!
//! Layout (little endian): magic `SEICKPT\0`, `u32` version, `u64` length
//! and UTF-8 JSON of the [`ArchConfig`], `u32` tensor count, then per tensor
//! `u32` name length, name, `u32` rank, `u64` dims, row-major `f64` data.
//! A JSON manifest of the architecture is written next to the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{ArchConfig, NetParams};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SEICKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub arch: ArchConfig,
    pub tensors: Vec<(String, Vec<usize>)>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(p: &NetParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let arch = serde_json::to_vec(&p.arch)?;
    out.extend_from_slice(&(arch.len() as u64).to_le_bytes());
    out.extend_from_slice(&arch);
    let tensors = p.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for d in &t.shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("checkpoint length overflows".into()))
    }
}

pub struct Decoded {
    pub arch: ArchConfig,
    pub tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

pub fn decode(bytes: &[u8]) -> Result<Decoded> {
    let mut r = Reader { buf: bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a parameter checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = r.len()?;
    let arch: ArchConfig = serde_json::from_slice(r.take(n)?)?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name =
            String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<usize>>>()?;
        let size = shape.iter().try_fold(1usize, |a, d| a.checked_mul(*d));
        let size = size.ok_or_else(|| Error::Format("tensor shape overflows".into()))?;
        let raw = r.take(
            size.checked_mul(8)
                .ok_or_else(|| Error::Format("tensor too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, shape, data));
    }
    if r.at != bytes.len() {
        return Err(Error::Format("trailing bytes after the last tensor".into()));
    }
    Ok(Decoded { arch, tensors })
}

pub fn save(path: &Path, p: &NetParams) -> Result<()> {
    fs::write(path, encode(p)?)?;
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        arch: p.arch.clone(),
        tensors: p.tensors().iter().map(|t| (t.name.clone(), t.shape.clone())).collect(),
    };
    fs::write(manifest_path(path), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// Loads into a model built for `arch`. With `allow_head_resize`, a
/// `classifier2` of a different class count is replaced by a fresh head
/// drawn from `seed`; every other shape must match exactly.
pub fn load_into(path: &Path, arch: &ArchConfig, allow_head_resize: bool, seed: u64) -> Result<NetParams> {
    let d = decode(&fs::read(path)?)?;
    let mut target = NetParams::init(arch, seed)?;
    let expected: Vec<(String, Vec<usize>)> = target
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.shape.clone()))
        .collect();
    let mut found: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, shape, data) in d.tensors {
        let Some((_, want)) = expected.iter().find(|(n, _)| *n == name) else {
            return Err(Error::Format(format!(
                "checkpoint tensor {name} does not exist in this architecture"
            )));
        };
        if *want != shape {
            if allow_head_resize && name.starts_with("classifier2.") {
                continue;
            }
            return Err(Error::Format(format!(
                "tensor {name} has shape {shape:?}, expected {want:?}"
            )));
        }
        found.push((name, data));
    }
    let mut missing = Vec::new();
    target.for_each_mut(|name, v| match found.iter().find(|(n, _)| n == name) {
        Some((_, data)) => v.copy_from_slice(data),
        None if allow_head_resize && name.starts_with("classifier2.") => {}
        None => missing.push(name.to_string()),
    });
    if !missing.is_empty() {
        return Err(Error::Format(format!("checkpoint lacks tensors {missing:?}")));
    }
    Ok(target)
}

/// Loads a checkpoint with the architecture it was saved with.
pub fn load(path: &Path) -> Result<NetParams> {
    let d = decode(&fs::read(path)?)?;
    load_into(path, &d.arch, false, 0)
}
