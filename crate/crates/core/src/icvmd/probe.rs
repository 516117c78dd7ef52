//! Rough VMD parameter suggestions from the periodogram.

use serde::{Deserialize, Serialize};

use crate::spectral::fft;
use crate::{ComplexSignal, Error, Result};

const SMOOTH_BINS: usize = 5;
/// Peaks must clear the median by 6 dB.
const PEAK_FACTOR_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSuggestion {
    pub k_range: (usize, usize),
    pub alpha: f64,
    pub peaks: usize,
    /// Mean −3 dB width of the detected peaks in bins (1 when none).
    pub mean_bandwidth_bins: f64,
}

fn smooth_circular(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let h = SMOOTH_BINS / 2;
    (0..n)
        .map(|i| (0..SMOOTH_BINS).map(|j| p[(i + n + j - h) % n]).sum::<f64>() / SMOOTH_BINS as f64)
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Width in bins of the contiguous run at or above half of the raw maximum
/// found within ±2 bins of `peak`.
fn half_power_width(raw: &[f64], peak: usize) -> f64 {
    let n = raw.len();
    let h = SMOOTH_BINS / 2;
    let centre = (0..SMOOTH_BINS)
        .map(|j| (peak + n + j - h) % n)
        .max_by(|&a, &b| raw[a].total_cmp(&raw[b]))
        .expect("window is nonempty");
    let half = 0.5 * raw[centre];
    let mut width = 1;
    let mut i = centre;
    while width < n && raw[(i + n - 1) % n] >= half {
        i = (i + n - 1) % n;
        width += 1;
    }
    let mut i = centre;
    while width < n && raw[(i + 1) % n] >= half {
        i = (i + 1) % n;
        width += 1;
    }
    width as f64
}

pub fn probe_parameters(x: &ComplexSignal) -> Result<ProbeSuggestion> {
    let n = x.len();
    if n < 64 {
        return Err(Error::param(format!("probing needs at least 64 samples, got {n}")));
    }
    let raw: Vec<f64> = fft(x.samples()).iter().map(|c| c.norm_sqr() / n as f64).collect();
    let smooth = smooth_circular(&raw);
    let threshold = median(&smooth) * 10f64.powf(PEAK_FACTOR_DB / 10.0);

    let mut peaks: Vec<usize> = Vec::new();
    for i in 0..n {
        let (l, r) = (smooth[(i + n - 1) % n], smooth[(i + 1) % n]);
        if smooth[i] > threshold && smooth[i] > l && smooth[i] >= r {
            // Rounding ripple on a smoothed plateau can fake a second maximum.
            if let Some(&last) = peaks.last() {
                if i - last < SMOOTH_BINS {
                    if smooth[i] > smooth[last] {
                        *peaks.last_mut().unwrap() = i;
                    }
                    continue;
                }
            }
            peaks.push(i);
        }
    }
    if peaks.len() > 1 {
        let (first, last) = (peaks[0], *peaks.last().unwrap());
        if first + n - last < SMOOTH_BINS {
            let drop = if smooth[first] >= smooth[last] {
                peaks.len() - 1
            } else {
                0
            };
            peaks.remove(drop);
        }
    }

    let count = peaks.len();
    let mean_bw = if count == 0 {
        1.0
    } else {
        peaks.iter().map(|&p| half_power_width(&raw, p)).sum::<f64>() / count as f64
    };
    let alpha = 10f64.powf((n as f64 / (4.0 * mean_bw)).log10().round());
    Ok(ProbeSuggestion {
        k_range: (count.max(5), (count + 2).max(8)),
        alpha,
        peaks: count,
        mean_bandwidth_bins: mean_bw,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use num_complex::Complex64;

    use super::*;

    fn tones(freqs: &[f64], n: usize) -> ComplexSignal {
        let s = (0..n)
            .map(|t| {
                freqs
                    .iter()
                    .map(|f| Complex64::from_polar(1.0, 2.0 * PI * f * t as f64))
                    .sum()
            })
            .collect();
        ComplexSignal::new(s, 1.0).unwrap()
    }

    #[test]
    fn single_tone_gets_default_window() {
        let s = probe_parameters(&tones(&[0.1], 1024)).unwrap();
        assert_eq!(s.peaks, 1);
        assert_eq!(s.k_range, (5, 8));
    }

    #[test]
    fn many_tones_raise_the_window() {
        let f: Vec<f64> = (1..=7).map(|i| i as f64 * 0.11).collect();
        let s = probe_parameters(&tones(&f, 2048)).unwrap();
        assert_eq!(s.peaks, 7);
        assert_eq!(s.k_range, (7, 9));
    }

    #[test]
    fn repeatable() {
        let x = tones(&[0.05, 0.25], 2048);
        assert_eq!(probe_parameters(&x).unwrap(), probe_parameters(&x).unwrap());
    }

    #[test]
    fn short_input_rejected() {
        assert!(probe_parameters(&tones(&[0.1], 63)).is_err());
    }
}
