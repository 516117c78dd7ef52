//! Power-amplifier behavioral models used as the emitter fingerprint source.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ComplexSignal;
use crate::{Error, Result};

/// Linear memory stage applied to every profile unless overridden.
pub fn default_linear_stage() -> Vec<f64> {
    vec![1.0, 0.05, 0.01, 0.005, 0.001, 0.0005]
}

/// Hammerstein coefficient set for one emitter: a memoryless odd-order
/// polynomial `b` followed by an FIR memory stage `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterProfile {
    pub name: String,
    /// Nonlinear coefficients `b_1..b_K`.
    pub b: Vec<f64>,
    /// Linear memory taps `c_0..c_{Q-1}`.
    #[serde(default = "default_linear_stage")]
    pub c: Vec<f64>,
}

impl EmitterProfile {
    pub fn new(name: impl Into<String>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let p = Self {
            name: name.into(),
            b,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn nonlinear_order(&self) -> usize {
        self.b.len()
    }

    pub fn memory_depth(&self) -> usize {
        self.c.len()
    }

    pub fn with_linear_stage(mut self, c: Vec<f64>) -> Result<Self> {
        self.c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.b.len();
        if k == 0 || k % 2 == 0 {
            return Err(Error::param(format!(
                "{}: nonlinear order must be odd and at least 1, got {k}",
                self.name
            )));
        }
        if self.c.is_empty() {
            return Err(Error::param(format!("{}: memory depth must be at least 1", self.name)));
        }
        for (label, v) in [("b", &self.b), ("c", &self.c)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param(format!("{}: {label} has non-finite entries", self.name)));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::param(format!("{}: {label} is all zero", self.name)));
            }
        }
        Ok(())
    }

    /// Static polynomial `Σ_k b_k x|x|^{k-1}`.
    fn polynomial(&self, x: Complex64) -> Complex64 {
        let mag = x.norm();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut pow = 1.0;
        for &bk in &self.b {
            acc += x * (bk * pow);
            pow *= mag;
        }
        acc
    }
}

/// The seven emitters of the simulated study, all sharing the default linear stage.
pub fn reference_emitters() -> Vec<EmitterProfile> {
    const B: [[f64; 5]; 7] = [
        [1.0, 0.0, 0.1126, 0.0, 0.2937],
        [1.0, 0.0, 0.2479, 0.0, 0.1396],
        [1.0, 0.0, 0.3959, 0.0, 0.1948],
        [1.0, 0.0, 0.5027, 0.0, 0.2833],
        [1.0, 0.0, 0.1683, 0.0, 0.4412],
        [1.0, 0.0, 0.3246, 0.0, 0.3463],
        [1.0, 0.0, 0.4698, 0.0, 0.3946],
    ];
    B.iter()
        .enumerate()
        .map(|(i, b)| EmitterProfile {
            name: format!("Radiation{}", i + 1),
            b: b.to_vec(),
            c: default_linear_stage(),
        })
        .collect()
}

/// `y(n) = Σ_q c_q Σ_k b_k x(n−q)|x(n−q)|^{k−1}` with zero history.
pub fn hammerstein_apply(x: &ComplexSignal, p: &EmitterProfile) -> Result<ComplexSignal> {
    p.validate()?;
    let shaped: Vec<Complex64> = x.samples().iter().map(|&s| p.polynomial(s)).collect();
    let y = (0..shaped.len())
        .map(|n| {
            p.c.iter()
                .enumerate()
                .take(n + 1)
                .map(|(q, &cq)| shaped[n - q] * cq)
                .sum()
        })
        .collect();
    x.with_samples(y)
}

/// Dense Volterra kernels `h_k(q_1..q_k)` over delays `0..=memory`.
///
/// Kernel `k` is stored row-major with `(memory+1)^k` entries, first delay
/// index slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraKernels {
    order: usize,
    memory: usize,
    kernels: BTreeMap<usize, Vec<f64>>,
}

impl VolterraKernels {
    pub fn new(order: usize, memory: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::param("Volterra order must be at least 1"));
        }
        Ok(Self {
            order,
            memory,
            kernels: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn set_kernel(&mut self, k: usize, coeffs: Vec<f64>) -> Result<()> {
        if k == 0 || k > self.order {
            return Err(Error::param(format!("kernel order {k} outside 1..={}", self.order)));
        }
        let want = (self.memory + 1).pow(k as u32);
        if coeffs.len() != want {
            return Err(Error::param(format!(
                "order-{k} kernel needs {want} coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("Volterra kernel has non-finite entries"));
        }
        self.kernels.insert(k, coeffs);
        Ok(())
    }

    pub fn kernel(&self, k: usize) -> Option<&[f64]> {
        self.kernels.get(&k).map(Vec::as_slice)
    }
}

/// `y(n) = Σ_k Σ_{q_1..q_k} h_k(q_1..q_k) Π_j x(n−q_j)`, zero history.
pub fn volterra_apply(x: &ComplexSignal, h: &VolterraKernels) -> Result<ComplexSignal> {
    let xs = x.samples();
    let span = h.memory + 1;
    let delayed = |n: usize, q: usize| if q <= n { xs[n - q] } else { Complex64::new(0.0, 0.0) };
    let mut y = vec![Complex64::new(0.0, 0.0); xs.len()];
    for (&k, coeffs) in &h.kernels {
        let mut idx = vec![0usize; k];
        for (flat, &coef) in coeffs.iter().enumerate() {
            if coef != 0.0 {
                let mut rem = flat;
                for slot in idx.iter_mut().rev() {
                    *slot = rem % span;
                    rem /= span;
                }
                for (n, out) in y.iter_mut().enumerate() {
                    let prod: Complex64 = idx.iter().map(|&q| delayed(n, q)).product();
                    *out += prod * coef;
                }
            }
        }
    }
    x.with_samples(y)
}
