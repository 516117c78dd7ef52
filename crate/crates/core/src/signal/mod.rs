//! Baseband signal synthesis and emitter fingerprint imprinting.

mod pa;
mod synth;

pub use pa::{
    default_linear_stage, hammerstein_apply, reference_emitters, volterra_apply, EmitterProfile, VolterraKernels,
};
pub use synth::{add_awgn, gen_baseband, normalize_power, ModulationKind, ModulationSpec};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniformly sampled complex baseband sequence.
///
/// Always nonempty, every sample finite, `sample_rate > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("signal must contain at least one sample"));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::param(format!("sample rate must be positive, got {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::param(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Normalized-frequency signal (`sample_rate = 1`).
    pub fn normalized(samples: Vec<Complex64>) -> Result<Self> {
        Self::new(samples, 1.0)
    }

    pub fn from_real(x: &[f64], sample_rate: f64) -> Result<Self> {
        Self::new(x.iter().map(|&v| Complex64::new(v, 0.0)).collect(), sample_rate)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|x|²`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Same sample rate, new samples. Validates like [`ComplexSignal::new`].
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }

    /// Rounds every component through `f32`, matching what an iqf32 file holds.
    pub fn quantized_f32(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| Complex64::new(s.re as f32 as f64, s.im as f32 as f64))
            .collect();
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}
