//! Splitting a complex signal into two real signals that carry its positive
//! and (conjugated) negative frequency content, and the discrete Hilbert
//! transform used to put them back together.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::{fft, fft_real, ifft};
use crate::{ComplexSignal, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcConvention {
    /// The whole DC bin goes to the positive side.
    #[default]
    DcToPositive,
    /// Half of the DC bin goes to each side.
    DcSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPair {
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    pub dc_convention: DcConvention,
    pub length: usize,
    /// `Im X[0] / N`. A real pair cannot hold the quadrature part of the DC
    /// bin, so it is carried here.
    pub dc_quadrature: f64,
    /// `Im X[N/2] / N` for even `N`, else 0.
    pub nyquist_quadrature: f64,
}

impl AnalyticPair {
    /// The part of the input neither side can represent:
    /// `j·(q_dc + q_nyq·(−1)^n)`.
    pub fn quadrature_signal(&self) -> Vec<Complex64> {
        quadrature_signal(self.length, self.dc_quadrature, self.nyquist_quadrature)
    }
}

pub(crate) fn quadrature_signal(n: usize, dc: f64, nyquist: f64) -> Vec<Complex64> {
    (0..n)
        .map(|t| {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(0.0, dc + nyquist * sign)
        })
        .collect()
}

fn check_len(n: usize, what: &str) -> Result<()> {
    if n < 4 {
        return Err(Error::param(format!("{what} needs at least 4 samples, got {n}")));
    }
    Ok(())
}

/// Strictly positive bins `1..ceil(N/2)`, excluding Nyquist.
fn positive_bins(n: usize) -> std::ops::Range<usize> {
    1..n.div_ceil(2)
}

pub fn analytic_split(x: &ComplexSignal, dc_convention: DcConvention) -> Result<AnalyticPair> {
    let n = x.len();
    check_len(n, "analytic split")?;
    let spec = fft(x.samples());
    let zero = Complex64::new(0.0, 0.0);
    let mut plus = vec![zero; n];
    let mut minus = vec![zero; n];
    for m in positive_bins(n) {
        plus[m] = spec[m];
        minus[m] = spec[n - m].conj();
    }
    match dc_convention {
        DcConvention::DcToPositive => plus[0] = spec[0],
        DcConvention::DcSplit => {
            plus[0] = 0.5 * spec[0];
            minus[0] = 0.5 * spec[0].conj();
        }
    }
    let mut nyquist_quadrature = 0.0;
    if n % 2 == 0 {
        let h = n / 2;
        plus[h] = 0.5 * spec[h];
        minus[h] = 0.5 * spec[h].conj();
        nyquist_quadrature = spec[h].im / n as f64;
    }
    Ok(AnalyticPair {
        x_plus: ifft(&plus).into_iter().map(|c| c.re).collect(),
        x_minus: ifft(&minus).into_iter().map(|c| c.re).collect(),
        dc_convention,
        length: n,
        dc_quadrature: spec[0].im / n as f64,
        nyquist_quadrature,
    })
}

/// Analytic signal `x + j·H[x]` by one-sided spectrum doubling.
pub fn analytic_signal(x: &[f64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    check_len(n, "Hilbert transform")?;
    let mut spec = fft_real(x);
    for m in positive_bins(n) {
        spec[m] *= 2.0;
        spec[n - m] = Complex64::new(0.0, 0.0);
    }
    Ok(ifft(&spec))
}

/// Discrete Hilbert transform `H[x]`.
pub fn hilbert_imag(x: &[f64]) -> Result<Vec<f64>> {
    Ok(analytic_signal(x)?.into_iter().map(|c| c.im).collect())
}
