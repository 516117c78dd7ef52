use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ComplexSignal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationKind {
    Cw,
    Lfm,
    Bpsk,
    Qpsk,
    Psk8,
    Msk,
}

impl ModulationKind {
    pub const ALL: [ModulationKind; 6] = [
        ModulationKind::Cw,
        ModulationKind::Lfm,
        ModulationKind::Bpsk,
        ModulationKind::Qpsk,
        ModulationKind::Psk8,
        ModulationKind::Msk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModulationKind::Cw => "cw",
            ModulationKind::Lfm => "lfm",
            ModulationKind::Bpsk => "bpsk",
            ModulationKind::Qpsk => "qpsk",
            ModulationKind::Psk8 => "psk8",
            ModulationKind::Msk => "msk",
        }
    }

    fn psk_order(self) -> Option<usize> {
        match self {
            ModulationKind::Bpsk => Some(2),
            ModulationKind::Qpsk => Some(4),
            ModulationKind::Psk8 => Some(8),
            _ => None,
        }
    }

    fn is_keyed(self) -> bool {
        self.psk_order().is_some() || self == ModulationKind::Msk
    }
}

impl fmt::Display for ModulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModulationKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown modulation '{s}'")))
    }
}

/// Intentional modulation parameters. Frequencies are in cycles/sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    pub kind: ModulationKind,
    #[serde(default = "default_carrier")]
    pub carrier: f64,
    #[serde(default = "default_sps")]
    pub samples_per_symbol: usize,
    #[serde(default = "default_span")]
    pub sweep_span: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_carrier() -> f64 {
    0.1
}
fn default_sps() -> usize {
    8
}
fn default_span() -> f64 {
    0.2
}

impl ModulationSpec {
    pub fn new(kind: ModulationKind, seed: u64) -> Self {
        Self {
            kind,
            carrier: default_carrier(),
            samples_per_symbol: default_sps(),
            sweep_span: default_span(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.carrier) {
            return Err(Error::param(format!("carrier {} outside [0, 0.5)", self.carrier)));
        }
        if self.kind.is_keyed() && self.samples_per_symbol == 0 {
            return Err(Error::param("samples_per_symbol must be at least 1"));
        }
        match self.kind {
            ModulationKind::Lfm => {
                if !(self.sweep_span >= 0.0 && self.sweep_span.is_finite()) {
                    return Err(Error::param("sweep_span must be a finite non-negative value"));
                }
                let hi = self.carrier + self.sweep_span / 2.0;
                let lo = self.carrier - self.sweep_span / 2.0;
                if hi >= 0.5 || lo <= -0.5 {
                    return Err(Error::param(format!(
                        "LFM sweep [{lo}, {hi}] aliases past the Nyquist frequency"
                    )));
                }
            }
            ModulationKind::Msk => {
                let dev = 1.0 / (4.0 * self.samples_per_symbol as f64);
                if self.carrier + dev >= 0.5 {
                    return Err(Error::param("MSK tone deviation aliases past the Nyquist frequency"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Unit-modulus baseband waveform of `n` samples.
///
/// PSK uses rectangular pulses, MSK is continuous-phase keying with tone
/// deviation `±1/(4·sps)`, LFM sweeps `sweep_span` centred on the carrier.
/// Symbol draws are a pure function of `spec.seed`.
pub fn gen_baseband(spec: &ModulationSpec, n: usize) -> Result<ComplexSignal> {
    if n == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fc = spec.carrier;
    let sps = spec.samples_per_symbol.max(1);
    let n_symbols = n.div_ceil(sps);

    let samples: Vec<Complex64> = match spec.kind {
        ModulationKind::Cw => (0..n)
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * fc * t as f64))
            .collect(),
        ModulationKind::Lfm => {
            let start = fc - spec.sweep_span / 2.0;
            let rate = spec.sweep_span / n as f64;
            (0..n)
                .map(|t| {
                    let t = t as f64;
                    Complex64::from_polar(1.0, 2.0 * PI * (start * t + 0.5 * rate * t * t))
                })
                .collect()
        }
        ModulationKind::Bpsk | ModulationKind::Qpsk | ModulationKind::Psk8 => {
            let m = spec.kind.psk_order().expect("psk kind");
            let symbols: Vec<f64> = (0..n_symbols)
                .map(|_| 2.0 * PI * rng.random_range(0..m) as f64 / m as f64)
                .collect();
            (0..n)
                .map(|t| Complex64::from_polar(1.0, 2.0 * PI * fc * t as f64 + symbols[t / sps]))
                .collect()
        }
        ModulationKind::Msk => {
            let dev = 1.0 / (4.0 * sps as f64);
            let bits: Vec<f64> = (0..n_symbols)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let mut phase = 0.0f64;
            let mut out = Vec::with_capacity(n);
            for t in 0..n {
                out.push(Complex64::from_polar(1.0, phase));
                phase += 2.0 * PI * (fc + bits[t / sps] * dev);
                phase = phase.rem_euclid(2.0 * PI);
            }
            out
        }
    };
    ComplexSignal::normalized(samples)
}

/// Scales to unit mean power; phases are untouched.
pub fn normalize_power(x: &ComplexSignal) -> Result<ComplexSignal> {
    let p = x.power();
    if p == 0.0 {
        return Err(Error::degenerate("cannot normalize an all-zero signal"));
    }
    let g = 1.0 / p.sqrt();
    x.with_samples(x.samples().iter().map(|s| s * g).collect())
}

/// Adds circular complex white Gaussian noise at `snr_db` relative to the
/// signal's own mean power. Deterministic for a given seed.
pub fn add_awgn(x: &ComplexSignal, snr_db: f64, seed: u64) -> Result<ComplexSignal> {
    if !snr_db.is_finite() {
        return Err(Error::param("snr_db must be finite"));
    }
    let p = x.power();
    if p == 0.0 {
        return Err(Error::degenerate("cannot set an SNR against a zero-power signal"));
    }
    let noise_var = p / 10f64.powf(snr_db / 10.0);
    let normal =
        Normal::new(0.0, (noise_var / 2.0).sqrt()).map_err(|e| Error::param(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = x
        .samples()
        .iter()
        .map(|s| s + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    x.with_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ModulationKind) -> ModulationSpec {
        ModulationSpec::new(kind, 42)
    }

    #[test]
    fn cw_is_complex_exponential() {
        let mut s = spec(ModulationKind::Cw);
        s.carrier = 0.1;
        let x = gen_baseband(&s, 4).unwrap();
        for (t, v) in x.samples().iter().enumerate() {
            let want = Complex64::from_polar(1.0, 2.0 * PI * 0.1 * t as f64);
            assert!((v - want).norm() < 1e-15);
        }
    }

    #[test]
    fn bpsk_has_exact_unit_modulus() {
        for seed in 0..5 {
            let x = gen_baseband(&ModulationSpec::new(ModulationKind::Bpsk, seed), 257).unwrap();
            assert!(x.samples().iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn every_kind_is_constant_envelope() {
        for kind in ModulationKind::ALL {
            let x = gen_baseband(&spec(kind), 2100).unwrap();
            let mags: Vec<f64> = x.samples().iter().map(|v| v.norm()).collect();
            let max = mags.iter().cloned().fold(f64::MIN, f64::max);
            let min = mags.iter().cloned().fold(f64::MAX, f64::min);
            assert!(max - min <= 1e-9, "{kind}: envelope spread {}", max - min);
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        for kind in ModulationKind::ALL {
            let a = gen_baseband(&spec(kind), 300).unwrap();
            let b = gen_baseband(&spec(kind), 300).unwrap();
            assert_eq!(a, b);
        }
        let a = gen_baseband(&ModulationSpec::new(ModulationKind::Qpsk, 1), 300).unwrap();
        let b = gen_baseband(&ModulationSpec::new(ModulationKind::Qpsk, 2), 300).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn msk_keeps_phase_continuous() {
        let s = spec(ModulationKind::Msk);
        let x = gen_baseband(&s, 400).unwrap();
        let max_step = 2.0 * PI * (s.carrier + 1.0 / (4.0 * s.samples_per_symbol as f64));
        for w in x.samples().windows(2) {
            let step = (w[1] * w[0].conj()).arg().abs();
            assert!(step <= max_step + 1e-12);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(gen_baseband(&spec(ModulationKind::Cw), 0).is_err());
        let mut s = spec(ModulationKind::Lfm);
        s.carrier = 0.4;
        s.sweep_span = 0.3;
        assert!(gen_baseband(&s, 10).is_err());
        let mut s = spec(ModulationKind::Bpsk);
        s.samples_per_symbol = 0;
        assert!(gen_baseband(&s, 10).is_err());
        let mut s = spec(ModulationKind::Cw);
        s.carrier = 0.5;
        assert!(gen_baseband(&s, 10).is_err());
    }

    #[test]
    fn normalize_scales_to_unit_power() {
        let x = ComplexSignal::normalized(vec![Complex64::new(2.0, 0.0); 8]).unwrap();
        let y = normalize_power(&x).unwrap();
        assert!(y
            .samples()
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        // Mean power of [3,0,0,0] is 9/4, so the gain is 1/1.5.
        let x = ComplexSignal::from_real(&[3.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        let y = normalize_power(&x).unwrap();
        let want = [2.0, 0.0, 0.0, 0.0];
        for (v, w) in y.samples().iter().zip(want) {
            assert!((v.re - w).abs() < 1e-12 && v.im == 0.0);
        }

        let tone = gen_baseband(&spec(ModulationKind::Cw), 64).unwrap();
        let again = normalize_power(&tone).unwrap();
        for (a, b) in again.samples().iter().zip(tone.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_keeps_phase_and_rejects_zero() {
        let x = ComplexSignal::normalized(vec![
            Complex64::new(0.3, -1.2),
            Complex64::new(-2.0, 0.5),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let y = normalize_power(&x).unwrap();
        assert!((y.power() - 1.0).abs() < 1e-12);
        for (a, b) in x.samples().iter().zip(y.samples()).take(2) {
            assert!((a.arg() - b.arg()).abs() < 1e-12);
        }
        let zero = ComplexSignal::normalized(vec![Complex64::new(0.0, 0.0); 4]).unwrap();
        assert!(matches!(normalize_power(&zero), Err(Error::Degenerate(_))));
    }

    fn empirical_noise_power_db(snr_db: f64) -> f64 {
        let x = ComplexSignal::normalized(vec![Complex64::new(1.0, 0.0); 100_000]).unwrap();
        let y = add_awgn(&x, snr_db, 7).unwrap();
        let n = y.len() as f64;
        let noise: f64 = y
            .samples()
            .iter()
            .zip(x.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n;
        10.0 * noise.log10()
    }

    #[test]
    fn awgn_noise_power_tracks_snr() {
        // 20 dB against unit power: 0.01, i.e. -20 dB.
        assert!((empirical_noise_power_db(20.0) - (-20.0)).abs() <= 0.5);
        // -4 dB: 10^0.4 ≈ 2.512, i.e. +4 dB.
        assert!((empirical_noise_power_db(-4.0) - 4.0).abs() <= 0.5);
    }

    #[test]
    fn awgn_is_deterministic_and_checks_power() {
        let x = gen_baseband(&spec(ModulationKind::Qpsk), 128).unwrap();
        assert_eq!(add_awgn(&x, 3.0, 9).unwrap(), add_awgn(&x, 3.0, 9).unwrap());
        assert_ne!(add_awgn(&x, 3.0, 9).unwrap(), add_awgn(&x, 3.0, 10).unwrap());
        let zero = ComplexSignal::normalized(vec![Complex64::new(0.0, 0.0); 4]).unwrap();
        assert!(matches!(add_awgn(&zero, 10.0, 1), Err(Error::Degenerate(_))));
    }
}
