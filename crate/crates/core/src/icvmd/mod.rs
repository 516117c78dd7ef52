//! Integrated complex VMD: split a complex signal into positive and negative
//! frequency halves, decompose each half as a real signal with its own
//! settings, label the modes, and recombine any subset of them.

mod analytic;
mod partition;
mod probe;

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::iq;
use crate::vmd::{vmd_decompose, VmdConfig, VmdResult};
use crate::{ComplexSignal, Error, Result};

pub use analytic::{analytic_signal, analytic_split, hilbert_imag, AnalyticPair, DcConvention};
pub use partition::{
    full_selection, parse_selection, partition_modes, partition_side, Component, DcPolicy, Labels, ModeLabel,
    PartitionPolicy, Selection,
};
pub use probe::{probe_parameters, ProbeSuggestion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcvmdConfig {
    pub pos: VmdConfig,
    pub neg: VmdConfig,
    #[serde(default)]
    pub partition: PartitionPolicy,
    #[serde(default)]
    pub dc_convention: DcConvention,
}

impl Default for IcvmdConfig {
    fn default() -> Self {
        Self::shared(VmdConfig::default())
    }
}

impl IcvmdConfig {
    /// Same solver settings on both sides (the classic complex-VMD setup).
    pub fn shared(cfg: VmdConfig) -> Self {
        Self {
            pos: cfg.clone(),
            neg: cfg,
            partition: PartitionPolicy::default(),
            dc_convention: DcConvention::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pos.validate()?;
        self.neg.validate()?;
        self.partition.validate()?;
        for (side, cfg) in [("positive", &self.pos), ("negative", &self.neg)] {
            if self.partition.n_signal_modes > cfg.k {
                return Err(Error::param(format!(
                    "n_signal_modes = {} exceeds the {} {side}-side modes",
                    self.partition.n_signal_modes, cfg.k
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcvmdResult {
    pub pos_modes: VmdResult,
    pub neg_modes: VmdResult,
    pub labels: Labels,
    pub length: usize,
    pub sample_rate: f64,
    pub dc_convention: DcConvention,
    pub dc_quadrature: f64,
    pub nyquist_quadrature: f64,
}

impl IcvmdResult {
    pub fn residual_plus(&self) -> &[f64] {
        &self.pos_modes.residual
    }

    pub fn residual_minus(&self) -> &[f64] {
        &self.neg_modes.residual
    }

    pub fn side(&self, side: Side) -> (&VmdResult, &[ModeLabel]) {
        match side {
            Side::Pos => (&self.pos_modes, &self.labels.pos),
            Side::Neg => (&self.neg_modes, &self.labels.neg),
        }
    }

    /// Mode energy as a fraction of the side's total mode energy.
    pub fn energy_fraction(&self, side: Side, k: usize) -> f64 {
        let (r, _) = self.side(side);
        let total: f64 = (0..r.mode_set.k()).map(|i| r.mode_energy(i)).sum();
        if total > 0.0 {
            r.mode_energy(k) / total
        } else {
            0.0
        }
    }

    /// The same decomposition with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            pos_modes: self.neg_modes.clone(),
            neg_modes: self.pos_modes.clone(),
            labels: Labels {
                pos: self.labels.neg.clone(),
                neg: self.labels.pos.clone(),
            },
            dc_quadrature: -self.dc_quadrature,
            nyquist_quadrature: -self.nyquist_quadrature,
            ..self.clone()
        }
    }
}

pub fn icvmd_decompose(x: &ComplexSignal, cfg: &IcvmdConfig) -> Result<IcvmdResult> {
    cfg.validate()?;
    let pair = analytic_split(x, cfg.dc_convention)?;
    let (pos, neg) = rayon::join(
        || vmd_decompose(&pair.x_plus, &cfg.pos),
        || vmd_decompose(&pair.x_minus, &cfg.neg),
    );
    let (pos, neg) = (pos?, neg?);
    let labels = partition_modes(&pos, &neg, &cfg.partition)?;
    Ok(IcvmdResult {
        pos_modes: pos,
        neg_modes: neg,
        labels,
        length: pair.length,
        sample_rate: x.sample_rate(),
        dc_convention: pair.dc_convention,
        dc_quadrature: pair.dc_quadrature,
        nyquist_quadrature: pair.nyquist_quadrature,
    })
}

fn side_sum(r: &VmdResult, labels: &[ModeLabel], selection: &Selection, n: usize) -> Vec<f64> {
    let mut s = if selection.contains(&Component::Residual) {
        r.residual.clone()
    } else {
        vec![0.0; n]
    };
    for (mode, label) in r.modes_time.iter().zip(labels) {
        if selection.contains(&Component::from(*label)) {
            for (a, b) in s.iter_mut().zip(mode) {
                *a += b;
            }
        }
    }
    s
}

/// `z(s_+) + conj(z(s_−))` over the selected components, with `z(s) = s + jH[s]`.
///
/// Selecting `Residual` also restores the DC and Nyquist quadrature that the
/// real sides cannot hold, so the full selection is the identity.
pub fn reconstruct(r: &IcvmdResult, selection: &Selection) -> Result<ComplexSignal> {
    let n = r.length;
    let consistent = n > 0
        && r.pos_modes.residual.len() == n
        && r.neg_modes.residual.len() == n
        && r.labels.pos.len() == r.pos_modes.modes_time.len()
        && r.labels.neg.len() == r.neg_modes.modes_time.len();
    if !consistent {
        return Err(Error::param("decomposition result is empty or inconsistent"));
    }
    let zp = analytic_signal(&side_sum(&r.pos_modes, &r.labels.pos, selection, n))?;
    let zn = analytic_signal(&side_sum(&r.neg_modes, &r.labels.neg, selection, n))?;
    let mut out: Vec<Complex64> = zp.iter().zip(&zn).map(|(a, b)| a + b.conj()).collect();
    if selection.contains(&Component::Residual) {
        let q = analytic::quadrature_signal(n, r.dc_quadrature, r.nyquist_quadrature);
        for (o, v) in out.iter_mut().zip(q) {
            *o += v;
        }
    }
    ComplexSignal::new(out, r.sample_rate)
}

/// Complex contribution of one real side signal to the reconstruction.
pub fn side_contribution(side: Side, s: &[f64]) -> Result<Vec<Complex64>> {
    let z = analytic_signal(s)?;
    Ok(match side {
        Side::Pos => z,
        Side::Neg => z.into_iter().map(|c| c.conj()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub file: String,
    pub side: Side,
    /// `None` for the residual files.
    pub index: Option<usize>,
    pub omega: Option<f64>,
    pub energy_fraction: Option<f64>,
    /// `None` for the residual files.
    pub label: Option<ModeLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpManifest {
    pub schema_version: u32,
    pub length: usize,
    pub sample_rate: f64,
    pub entries: Vec<DumpEntry>,
}

pub const DUMP_MANIFEST: &str = "modes.json";

/// Writes every mode's complex contribution as an iqf32 file plus a
/// manifest. The positive residual file also carries the DC and Nyquist
/// quadrature, so summing every file gives back the input.
pub fn write_mode_dump(dir: &Path, r: &IcvmdResult) -> Result<DumpManifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for side in [Side::Pos, Side::Neg] {
        let (res, labels) = r.side(side);
        let tag = match side {
            Side::Pos => "pos",
            Side::Neg => "neg",
        };
        for (k, mode) in res.modes_time.iter().enumerate() {
            let file = format!("{tag}_mode_{k:02}.iqf32");
            iq::write_iqf32(&dir.join(&file), &side_contribution(side, mode)?)?;
            entries.push(DumpEntry {
                file,
                side,
                index: Some(k),
                omega: Some(res.mode_set.omegas[k]),
                energy_fraction: Some(r.energy_fraction(side, k)),
                label: Some(labels[k]),
            });
        }
        let mut residual = side_contribution(side, &res.residual)?;
        if side == Side::Pos {
            let q = analytic::quadrature_signal(r.length, r.dc_quadrature, r.nyquist_quadrature);
            for (a, b) in residual.iter_mut().zip(q) {
                *a += b;
            }
        }
        let file = format!("{tag}_residual.iqf32");
        iq::write_iqf32(&dir.join(&file), &residual)?;
        entries.push(DumpEntry {
            file,
            side,
            index: None,
            omega: None,
            energy_fraction: None,
            label: None,
        });
    }
    let manifest = DumpManifest {
        schema_version: crate::SCHEMA_VERSION,
        length: r.length,
        sample_rate: r.sample_rate,
        entries,
    };
    fs::write(dir.join(DUMP_MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_dump_manifest(dir: &Path) -> Result<DumpManifest> {
    let m: DumpManifest = serde_json::from_slice(&fs::read(dir.join(DUMP_MANIFEST))?)?;
    if m.schema_version != crate::SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported mode dump schema {}",
            m.schema_version
        )));
    }
    Ok(m)
}

/// Sums the dumped contributions whose label (or residual status) is selected.
pub fn reconstruct_from_dump(dir: &Path, selection: &Selection) -> Result<ComplexSignal> {
    let m = read_dump_manifest(dir)?;
    let mut out = vec![Complex64::new(0.0, 0.0); m.length];
    for e in &m.entries {
        let component = e.label.map(Component::from).unwrap_or(Component::Residual);
        if !selection.contains(&component) {
            continue;
        }
        let path: PathBuf = dir.join(&e.file);
        let samples = iq::decode(&fs::read(&path)?)?;
        if samples.len() != m.length {
            return Err(Error::Format(format!(
                "{} holds {} samples, manifest says {}",
                path.display(),
                samples.len(),
                m.length
            )));
        }
        for (o, s) in out.iter_mut().zip(samples) {
            *o += s;
        }
    }
    ComplexSignal::new(out, m.sample_rate)
}
