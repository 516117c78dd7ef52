//! Thin FFT helpers over `rustfft` shared by the solver and the analytic
//! splitting code. Plans are cached per thread.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward DFT, unnormalized: `X[m] = Σ x[n] e^{-j2πmn/N}`.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(&mut buf));
    buf
}

/// Inverse DFT including the `1/N` factor.
pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let n = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut buf));
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&buf)
}

/// Inverse of a half spectrum (bins `0..=n/2`) under Hermitian symmetry.
///
/// `n` must be even and `half.len() == n/2 + 1`. The imaginary parts of the
/// DC and Nyquist bins are ignored, as they would be for any real signal.
pub fn irfft_half(half: &[Complex64], n: usize) -> Vec<f64> {
    debug_assert!(n % 2 == 0 && half.len() == n / 2 + 1);
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    full[0] = Complex64::new(half[0].re, 0.0);
    full[n / 2] = Complex64::new(half[n / 2].re, 0.0);
    for m in 1..n / 2 {
        full[m] = half[m];
        full[n - m] = half[m].conj();
    }
    ifft(&full).into_iter().map(|c| c.re).collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn energy_c(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `‖a − b‖ / ‖b‖` for complex sequences of equal length.
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den = energy_c(b);
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
