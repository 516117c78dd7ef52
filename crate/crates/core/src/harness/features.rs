//! Fixed-layout feature vectors for the centroid baseline.
//!
//! Layout for `retained` mode slots:
//! `[mode0.omega, mode0.bandwidth, mode0.energy, mode1.omega, …, c20, c21, c40, c42]`.
//! Omegas are signed (negative-side modes carry a minus sign), bandwidths are
//! the −3 dB width of the mode spectrum, energies are fractions of the total
//! mode energy over both sides. Empty slots are zero.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::icvmd::{reconstruct, Component, IcvmdConfig, IcvmdResult, ModeLabel, Side};
use crate::{ComplexSignal, Error, Result};

/// Second and fourth order cumulants of a mean-removed complex sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub c20: Complex64,
    pub c21: f64,
    pub c40: Complex64,
    pub c42: f64,
}

impl Cumulants {
    pub fn magnitudes(&self) -> [f64; 4] {
        [self.c20.norm(), self.c21.abs(), self.c40.norm(), self.c42.abs()]
    }
}

/// Sample cumulants after removing the sample mean, so `c21 = E|y|² − |E y|²`.
pub fn cumulants(y: &[Complex64]) -> Result<Cumulants> {
    if y.is_empty() {
        return Err(Error::param("cumulants need at least one sample"));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<Complex64>() / n;
    let (mut m20, mut m21, mut m40, mut m42) = (Complex64::new(0.0, 0.0), 0.0, Complex64::new(0.0, 0.0), 0.0);
    for v in y {
        let d = v - mean;
        let d2 = d * d;
        let p = d.norm_sqr();
        m20 += d2;
        m21 += p;
        m40 += d2 * d2;
        m42 += p * p;
    }
    let (m20, m21, m40, m42) = (m20 / n, m21 / n, m40 / n, m42 / n);
    Ok(Cumulants {
        c20: m20,
        c21: m21,
        c40: m40 - 3.0 * m20 * m20,
        c42: m42 - m20.norm_sqr() - 2.0 * m21 * m21,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeStat {
    pub side: Side,
    pub index: usize,
    /// Signed centre frequency in rad/sample.
    pub omega: f64,
    /// Half-power width of the mode spectrum in rad/sample.
    pub bandwidth: f64,
    pub energy_fraction: f64,
}

/// −3 dB width of a half spectrum around its peak, in bins.
pub fn half_power_width(spectrum: &[Complex64]) -> usize {
    let power: Vec<f64> = spectrum.iter().map(|v| v.norm_sqr()).collect();
    let Some((peak, &max)) = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return 0;
    };
    if max <= 0.0 {
        return 0;
    }
    let half = max / 2.0;
    let mut lo = peak;
    while lo > 0 && power[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < power.len() && power[hi + 1] >= half {
        hi += 1;
    }
    hi - lo + 1
}

/// Stats of the FeaturePart and Special modes of both sides, energy-descending.
pub fn retained_modes(r: &IcvmdResult) -> Vec<ModeStat> {
    let total: f64 = [Side::Pos, Side::Neg]
        .iter()
        .map(|&s| {
            let (v, _) = r.side(s);
            (0..v.mode_set.k()).map(|k| v.mode_energy(k)).sum::<f64>()
        })
        .sum();
    let mut out = Vec::new();
    for side in [Side::Pos, Side::Neg] {
        let (v, labels) = r.side(side);
        let sign = if side == Side::Pos { 1.0 } else { -1.0 };
        for (k, label) in labels.iter().enumerate() {
            if !matches!(label, ModeLabel::FeaturePart | ModeLabel::Special) {
                continue;
            }
            out.push(ModeStat {
                side,
                index: k,
                omega: sign * v.mode_set.omegas[k],
                bandwidth: half_power_width(&v.mode_set.mode_spectra[k]) as f64 * v.mode_set.grid_step(),
                energy_fraction: if total > 0.0 { v.mode_energy(k) / total } else { 0.0 },
            });
        }
    }
    out.sort_by(|a, b| b.energy_fraction.total_cmp(&a.energy_fraction));
    out
}

/// Energy-descending slots of `(omega, bandwidth, energy)`, truncated or
/// zero-padded to `slots`.
pub fn pack_modes(stats: &[ModeStat], slots: usize) -> Vec<f64> {
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| b.energy_fraction.total_cmp(&a.energy_fraction));
    let mut out = vec![0.0; 3 * slots];
    for (i, s) in sorted.iter().take(slots).enumerate() {
        out[3 * i] = s.omega;
        out[3 * i + 1] = s.bandwidth;
        out[3 * i + 2] = s.energy_fraction;
    }
    out
}

pub fn feature_names(slots: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..slots)
        .flat_map(|i| ["omega", "bandwidth", "energy"].map(|f| format!("mode{i}.{f}")))
        .collect();
    names.extend(["c20", "c21", "c40", "c42"].map(String::from));
    names
}

pub fn raw_feature_names() -> Vec<String> {
    ["c20", "c21", "c40", "c42"].map(String::from).to_vec()
}

fn feature_selection() -> BTreeSet<Component> {
    BTreeSet::from([Component::FeaturePart])
}

/// Mode stats plus cumulant magnitudes of the FeaturePart reconstruction.
pub fn extract_features(r: &IcvmdResult, slots: usize) -> Result<Vec<f64>> {
    if !r
        .labels
        .pos
        .iter()
        .chain(&r.labels.neg)
        .any(|l| *l == ModeLabel::FeaturePart)
    {
        return Err(Error::degenerate("decomposition has no FeaturePart modes"));
    }
    let mut out = pack_modes(&retained_modes(r), slots);
    let y = reconstruct(r, &feature_selection())?;
    out.extend(cumulants(y.samples())?.magnitudes());
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::degenerate("feature vector has non-finite entries"));
    }
    Ok(out)
}

/// Cumulant magnitudes of the signal itself, no decomposition.
pub fn raw_features(x: &ComplexSignal) -> Result<Vec<f64>> {
    Ok(cumulants(x.samples())?.magnitudes().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    #[serde(default)]
    pub icvmd: IcvmdConfig,
    #[serde(default = "default_slots")]
    pub retained_modes: usize,
}

fn default_slots() -> usize {
    4
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            icvmd: IcvmdConfig::default(),
            retained_modes: default_slots(),
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        3 * self.retained_modes + 4
    }

    pub fn validate(&self) -> Result<()> {
        self.icvmd.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_of_a_flat_top() {
        let s: Vec<Complex64> = [0.1, 1.0, 0.9, 0.8, 0.2]
            .iter()
            .map(|&v: &f64| Complex64::new(v.sqrt(), 0.0))
            .collect();
        assert_eq!(half_power_width(&s), 3);
        assert_eq!(half_power_width(&[Complex64::new(0.0, 0.0); 4]), 0);
    }

    #[test]
    fn names_match_dimension() {
        let cfg = FeatureConfig::default();
        assert_eq!(feature_names(cfg.retained_modes).len(), cfg.dim());
    }
}
