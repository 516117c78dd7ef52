//! Variational mode decomposition of real signals by the frequency-domain
//! ADMM iteration: Wiener-filter mode updates, spectral centre-of-gravity
//! frequency updates and dual ascent on the reconstruction constraint.
//!
//! The input is mirror-extended by half its length on each side, so the
//! solver works on the half grid `ω_m = 2πm/N_ext`, `m = 0..=N_ext/2` of the
//! doubled length. Modes come back in the time domain through a
//! Hermitian-symmetric inverse transform, trimmed to the input span.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spectral::{fft_real, irfft_half};
use crate::{Error, Result};

/// Squared norms below this are treated as empty modes.
pub const ENERGY_GUARD: f64 = 1e-30;

/// Default bandwidth penalty on the radian grid. Reference implementations
/// that measure frequency in cycles/sample quote α ≈ 2000 for the same
/// filter width.
pub const DEFAULT_ALPHA: f64 = 50.0;

/// How many times one mode may be moved off a colliding centre frequency.
const MAX_RESEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "seed", rename_all = "snake_case")]
pub enum OmegaInit {
    /// `ω_k = (k − ½)π/K`.
    UniformSpread,
    AllZero,
    RandomSeeded(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmdConfig {
    /// Number of modes.
    pub k: usize,
    /// Bandwidth penalty.
    pub alpha: f64,
    /// Dual ascent step; 0 disables the multiplier.
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_init")]
    pub init: OmegaInit,
    /// Pin the first mode at ω = 0.
    #[serde(default)]
    pub dc_lock: bool,
}

fn default_tol() -> f64 {
    1e-7
}
fn default_max_iter() -> usize {
    500
}
fn default_init() -> OmegaInit {
    OmegaInit::UniformSpread
}

impl Default for VmdConfig {
    fn default() -> Self {
        Self {
            k: 5,
            alpha: DEFAULT_ALPHA,
            tau: 0.0,
            tol: default_tol(),
            max_iter: default_max_iter(),
            init: default_init(),
            dc_lock: false,
        }
    }
}

impl VmdConfig {
    pub fn new(k: usize, alpha: f64) -> Self {
        Self {
            k,
            alpha,
            ..Self::default()
        }
    }

    /// Enables the multiplier (τ = 0.1) so the modes sum back to the input.
    pub fn exact_reconstruction(mut self) -> Self {
        self.tau = 0.1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("mode count K must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::param(format!("tau must be non-negative, got {}", self.tau)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Solver state in the frequency domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    /// One half spectrum per mode, bins `0..=ext_len/2`.
    pub mode_spectra: Vec<Vec<Complex64>>,
    /// Centre frequencies in rad/sample, ascending.
    pub omegas: Vec<f64>,
    pub lambda_spectrum: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_delta: f64,
    /// Length of the mirror-extended signal the grid refers to.
    pub ext_len: usize,
    /// Whether mode 0 was pinned at DC.
    pub dc_locked: bool,
}

impl ModeSet {
    pub fn k(&self) -> usize {
        self.omegas.len()
    }

    /// Bin spacing `2π/N_ext` in rad/sample.
    pub fn grid_step(&self) -> f64 {
        2.0 * PI / self.ext_len as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        half_grid(self.ext_len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmdResult {
    pub modes_time: Vec<Vec<f64>>,
    pub mode_set: ModeSet,
    /// Input minus the sum of the modes.
    pub residual: Vec<f64>,
}

impl VmdResult {
    pub fn mode_energy(&self, k: usize) -> f64 {
        self.modes_time[k].iter().map(|v| v * v).sum()
    }
}

/// `ω_m = 2πm/n` for `m = 0..=n/2`.
pub fn half_grid(n: usize) -> Vec<f64> {
    (0..=n / 2).map(|m| 2.0 * PI * m as f64 / n as f64).collect()
}

fn check_same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::param(format!("{what}: grid mismatch ({a} vs {b} bins)")));
    }
    Ok(())
}

/// Wiener-filter update of one mode:
/// `û_k(ω) = (f̂(ω) − Σ_{i≠k} û_i(ω) + λ̂(ω)/2) / (1 + 2α(ω − ω_k)²)`.
pub fn wiener_mode_update(
    f_hat: &[Complex64],
    others_sum: &[Complex64],
    lambda: &[Complex64],
    freqs: &[f64],
    omega_k: f64,
    alpha: f64,
) -> Result<Vec<Complex64>> {
    check_same_len("wiener update", f_hat.len(), others_sum.len())?;
    check_same_len("wiener update", f_hat.len(), lambda.len())?;
    check_same_len("wiener update", f_hat.len(), freqs.len())?;
    let mut out = Vec::with_capacity(f_hat.len());
    wiener_into(&mut out, f_hat, others_sum, lambda, freqs, omega_k, alpha);
    Ok(out)
}

fn wiener_into(
    out: &mut Vec<Complex64>,
    f_hat: &[Complex64],
    others_sum: &[Complex64],
    lambda: &[Complex64],
    freqs: &[f64],
    omega_k: f64,
    alpha: f64,
) {
    out.clear();
    out.extend((0..f_hat.len()).map(|m| {
        let d = freqs[m] - omega_k;
        (f_hat[m] - others_sum[m] + lambda[m] * 0.5) / (1.0 + 2.0 * alpha * d * d)
    }));
}

/// Centre of gravity of the mode's power spectrum over the half grid.
pub fn center_frequency(u_hat: &[Complex64], freqs: &[f64]) -> Result<f64> {
    check_same_len("center frequency", u_hat.len(), freqs.len())?;
    let (num, den) = u_hat.iter().zip(freqs).fold((0.0, 0.0), |(n, d), (u, &w)| {
        let p = u.norm_sqr();
        (n + w * p, d + p)
    });
    if den == 0.0 {
        return Err(Error::degenerate("center frequency of an all-zero spectrum"));
    }
    Ok(num / den)
}

/// `λ̂ ← λ̂ + τ(f̂ − Σ_k û_k)`.
pub fn dual_ascent(
    lambda: &[Complex64],
    f_hat: &[Complex64],
    mode_sum: &[Complex64],
    tau: f64,
) -> Result<Vec<Complex64>> {
    check_same_len("dual ascent", lambda.len(), f_hat.len())?;
    check_same_len("dual ascent", lambda.len(), mode_sum.len())?;
    if tau == 0.0 {
        return Ok(lambda.to_vec());
    }
    Ok(lambda
        .iter()
        .zip(f_hat.iter().zip(mode_sum))
        .map(|(l, (f, s))| l + (f - s) * tau)
        .collect())
}

/// `Σ_k ‖û_k^{n+1} − û_k^n‖² / ‖û_k^n‖²`; modes whose previous norm is
/// below [`ENERGY_GUARD`] contribute nothing.
pub fn convergence_metric(prev: &[Vec<Complex64>], curr: &[Vec<Complex64>]) -> Result<f64> {
    if prev.len() != curr.len() {
        return Err(Error::param(format!(
            "convergence metric: {} vs {} modes",
            prev.len(),
            curr.len()
        )));
    }
    let mut total = 0.0;
    for (p, c) in prev.iter().zip(curr) {
        check_same_len("convergence metric", p.len(), c.len())?;
        let norm: f64 = p.iter().map(|v| v.norm_sqr()).sum();
        if norm < ENERGY_GUARD {
            continue;
        }
        let diff: f64 = p.iter().zip(c).map(|(a, b)| (b - a).norm_sqr()).sum();
        total += diff / norm;
    }
    Ok(total)
}

fn mirror_extend(x: &[f64]) -> (Vec<f64>, usize) {
    let half = x.len() / 2;
    let mut ext = Vec::with_capacity(2 * x.len());
    ext.extend(x[..half].iter().rev());
    ext.extend_from_slice(x);
    ext.extend(x[half..].iter().rev());
    (ext, half)
}

fn initial_omegas(cfg: &VmdConfig) -> Vec<f64> {
    let k = cfg.k;
    let mut omegas: Vec<f64> = match cfg.init {
        OmegaInit::UniformSpread => (0..k).map(|i| (i as f64 + 0.5) * PI / k as f64).collect(),
        OmegaInit::AllZero => vec![0.0; k],
        OmegaInit::RandomSeeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * PI).collect();
            w.sort_by(f64::total_cmp);
            w
        }
    };
    if cfg.dc_lock {
        omegas[0] = 0.0;
    }
    omegas
}

/// Midpoint of the widest gap between the other centre frequencies
/// (with 0 and π as outer fences).
fn largest_gap_midpoint(omegas: &[f64], skip: usize) -> f64 {
    let mut fences: Vec<f64> = omegas
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &w)| w)
        .collect();
    fences.push(0.0);
    fences.push(PI);
    fences.sort_by(f64::total_cmp);
    let (lo, hi) =
        fences.windows(2).map(|w| (w[0], w[1])).fold(
            (0.0, 0.0),
            |best, (a, b)| if b - a > best.1 - best.0 { (a, b) } else { best },
        );
    0.5 * (lo + hi)
}

/// Decomposes a real signal into `cfg.k` band-limited modes.
///
/// Non-convergence within `max_iter` is reported through
/// `mode_set.converged`, not as an error.
pub fn vmd_decompose(x: &[f64], cfg: &VmdConfig) -> Result<VmdResult> {
    cfg.validate()?;
    if x.len() < 2 * cfg.k {
        return Err(Error::param(format!(
            "input of {} samples is too short for {} modes",
            x.len(),
            cfg.k
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("input contains non-finite samples"));
    }

    let (ext, offset) = mirror_extend(x);
    let ext_len = ext.len();
    let spectrum = fft_real(&ext);
    let f_hat: Vec<Complex64> = spectrum[..=ext_len / 2].to_vec();
    let freqs = half_grid(ext_len);
    let bins = freqs.len();
    let step = 2.0 * PI / ext_len as f64;
    let zero = Complex64::new(0.0, 0.0);

    let k = cfg.k;
    let mut omegas = initial_omegas(cfg);
    let mut modes = vec![vec![zero; bins]; k];
    let mut lambda = vec![zero; bins];
    let mut reseeds = vec![0usize; k];
    let mut others = vec![zero; bins];
    let mut scratch = Vec::with_capacity(bins);

    let mut iterations = 0;
    let mut converged = false;
    let mut final_delta = f64::INFINITY;

    while iterations < cfg.max_iter {
        iterations += 1;
        let prev = modes.clone();
        let mut total = vec![zero; bins];
        for m in &modes {
            for (t, v) in total.iter_mut().zip(m) {
                *t += v;
            }
        }
        for i in 0..k {
            for ((o, t), v) in others.iter_mut().zip(&total).zip(&modes[i]) {
                *o = t - v;
            }
            wiener_into(&mut scratch, &f_hat, &others, &lambda, &freqs, omegas[i], cfg.alpha);
            std::mem::swap(&mut modes[i], &mut scratch);
            for ((t, o), v) in total.iter_mut().zip(&others).zip(&modes[i]) {
                *t = o + v;
            }
            if !(cfg.dc_lock && i == 0) {
                let energy: f64 = modes[i].iter().map(|v| v.norm_sqr()).sum();
                if energy >= ENERGY_GUARD {
                    omegas[i] = center_frequency(&modes[i], &freqs)?.clamp(0.0, PI);
                }
            }
        }

        for i in 1..k {
            if reseeds[i] >= MAX_RESEEDS {
                continue;
            }
            if (0..i).any(|j| (omegas[i] - omegas[j]).abs() < step) {
                omegas[i] = largest_gap_midpoint(&omegas, i);
                reseeds[i] += 1;
            }
        }
        debug_assert!(omegas.iter().all(|w| (0.0..=PI).contains(w)));

        if cfg.tau != 0.0 {
            lambda = dual_ascent(&lambda, &f_hat, &total, cfg.tau)?;
        }

        // The first sweep starts from all-zero modes, which the guarded
        // metric would score as a perfect fixed point.
        if iterations >= 2 {
            final_delta = convergence_metric(&prev, &modes)?;
            if final_delta < cfg.tol {
                converged = true;
                break;
            }
        }
    }
    if !final_delta.is_finite() {
        final_delta = convergence_metric(&vec![vec![zero; bins]; k], &modes)?;
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| omegas[a].total_cmp(&omegas[b]));
    let omegas: Vec<f64> = order.iter().map(|&i| omegas[i]).collect();
    let mode_spectra: Vec<Vec<Complex64>> = order.iter().map(|&i| modes[i].clone()).collect();

    let n = x.len();
    let modes_time: Vec<Vec<f64>> = mode_spectra
        .iter()
        .map(|spec| irfft_half(spec, ext_len)[offset..offset + n].to_vec())
        .collect();
    let mut residual = x.to_vec();
    for m in &modes_time {
        for (r, v) in residual.iter_mut().zip(m) {
            *r -= v;
        }
    }

    Ok(VmdResult {
        modes_time,
        mode_set: ModeSet {
            mode_spectra,
            omegas,
            lambda_spectrum: lambda,
            iterations,
            converged,
            final_delta,
            ext_len,
            dc_locked: cfg.dc_lock && order[0] == 0,
        },
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn wiener_passes_center_bin_through() {
        let freqs = [0.0, 0.5, 1.0, 1.5];
        let f = [c(1.0), c(2.0), Complex64::new(3.0, -1.0), c(4.0)];
        let zero = [c(0.0); 4];
        let u = wiener_mode_update(&f, &zero, &zero, &freqs, 1.0, 250.0).unwrap();
        assert_eq!(u[2], f[2]);
    }

    #[test]
    fn wiener_huge_alpha_suppresses_off_center() {
        let freqs = [0.0, 0.5, 1.0];
        let f = [c(1.0); 3];
        let zero = [c(0.0); 3];
        let u = wiener_mode_update(&f, &zero, &zero, &freqs, 1.0, 1e12).unwrap();
        assert!(u[0].norm() <= 1e-6 && u[1].norm() <= 1e-6);
    }

    #[test]
    fn wiener_hand_value() {
        // 1 / (1 + 2·0.5·1²)
        let freqs = [0.0, 1.0];
        let u = wiener_mode_update(&[c(1.0); 2], &[c(0.0); 2], &[c(0.0); 2], &freqs, 0.0, 0.5).unwrap();
        assert!((u[1] - c(0.5)).norm() < 1e-15);
        assert!(wiener_mode_update(&[c(1.0); 2], &[c(0.0); 3], &[c(0.0); 2], &freqs, 0.0, 0.5).is_err());
    }

    #[test]
    fn center_frequency_cases() {
        let freqs = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(
            center_frequency(&[c(0.0), c(0.0), Complex64::new(0.0, 3.0), c(0.0)], &freqs).unwrap(),
            0.3
        );
        let two = center_frequency(&[c(2.0), c(0.0), c(0.0), c(-2.0)], &freqs).unwrap();
        assert!((two - 0.25).abs() < 1e-15);
        // Magnitudes [1,2,1] weight the powers [1,4,1]: (0.1 + 0.8 + 0.3)/6.
        let w = center_frequency(&[c(1.0), c(2.0), c(1.0)], &freqs[..3]).unwrap();
        assert!((w - 0.2).abs() < 1e-15);
        assert!(matches!(
            center_frequency(&[c(0.0); 4], &freqs),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn dual_ascent_cases() {
        let lambda = vec![Complex64::new(0.3, -0.7), c(-1.0)];
        let f = vec![c(2.0), Complex64::new(0.0, 1.0)];
        let s = vec![c(1.0), c(0.5)];
        assert_eq!(dual_ascent(&lambda, &f, &s, 0.0).unwrap(), lambda);

        let r: Vec<Complex64> = f.iter().zip(&s).map(|(a, b)| a - b).collect();
        let zero = vec![c(0.0); 2];
        assert_eq!(dual_ascent(&zero, &f, &s, 1.0).unwrap(), r);

        let once = dual_ascent(&zero, &f, &s, 0.5).unwrap();
        let twice = dual_ascent(&once, &f, &s, 0.5).unwrap();
        for (a, b) in twice.iter().zip(&r) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn convergence_metric_cases() {
        let a = vec![vec![c(1.0), Complex64::new(0.0, 2.0)]];
        assert_eq!(convergence_metric(&a, &a).unwrap(), 0.0);
        let doubled = vec![a[0].iter().map(|v| v * 2.0).collect::<Vec<_>>()];
        assert!((convergence_metric(&a, &doubled).unwrap() - 1.0).abs() < 1e-15);

        let prev = vec![a[0].clone(), vec![c(3.0), c(-1.0)]];
        let curr = vec![a[0].clone(), vec![c(6.0), c(-2.0)]];
        assert!((convergence_metric(&prev, &curr).unwrap() - 1.0).abs() < 1e-15);

        let empty = vec![vec![c(0.0); 2]];
        assert_eq!(convergence_metric(&empty, &a).unwrap(), 0.0);
        assert!(convergence_metric(&prev, &a).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(VmdConfig::new(0, 10.0).validate().is_err());
        assert!(VmdConfig::new(2, 0.0).validate().is_err());
        let mut cfg = VmdConfig::new(2, 10.0);
        cfg.max_iter = 0;
        assert!(cfg.validate().is_err());
        assert_eq!(VmdConfig::new(2, 10.0).exact_reconstruction().tau, 0.1);
    }

    #[test]
    fn rejects_short_or_nonfinite_input() {
        let cfg = VmdConfig::new(3, 100.0);
        assert!(vmd_decompose(&[1.0; 5], &cfg).is_err());
        assert!(vmd_decompose(&[1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn uniform_spread_initialisation() {
        let w = initial_omegas(&VmdConfig::new(4, 1.0));
        for (i, v) in w.iter().enumerate() {
            assert!((v - (i as f64 + 0.5) * PI / 4.0).abs() < 1e-15);
        }
        let mut cfg = VmdConfig::new(3, 1.0);
        cfg.dc_lock = true;
        assert_eq!(initial_omegas(&cfg)[0], 0.0);
    }

    #[test]
    fn gap_midpoint_picks_widest_hole() {
        let w = [0.1, 0.12, 3.0];
        let mid = largest_gap_midpoint(&w, 1);
        assert!((mid - 1.55).abs() < 1e-12);
    }
}
