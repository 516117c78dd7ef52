//! The `iqf32` signal file format: little-endian `f32` pairs, interleaved
//! I then Q, no header. Metadata lives in a JSON sidecar next to the file
//! (`foo.iqf32` → `foo.json`).

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::signal::ComplexSignal;
use crate::{Error, Result};

/// Sidecar metadata for one recorded or synthesized signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_rate: f64,
    pub label: usize,
    pub modulation: String,
    pub snr_db: f64,
    pub seed: u64,
    pub emitter_id: String,
}

pub fn encode(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "iqf32 payload of {} bytes is not a whole number of I/Q pairs",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_iqf32(path: &Path, samples: &[Complex64]) -> Result<()> {
    fs::write(path, encode(samples))?;
    Ok(())
}

/// Reads samples and, when present, the sidecar's sample rate.
pub fn read_signal(path: &Path) -> Result<(ComplexSignal, Option<Sidecar>)> {
    let samples = decode(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let sidecar = if side.exists() {
        Some(read_sidecar(&side)?)
    } else {
        None
    };
    let rate = sidecar.as_ref().map_or(1.0, |s| s.sample_rate);
    Ok((ComplexSignal::new(samples, rate)?, sidecar))
}

pub fn write_signal(path: &Path, x: &ComplexSignal, sidecar: Option<&Sidecar>) -> Result<()> {
    write_iqf32(path, x.samples())?;
    if let Some(meta) = sidecar {
        fs::write(sidecar_path(path), serde_json::to_vec_pretty(meta)?)?;
    }
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
