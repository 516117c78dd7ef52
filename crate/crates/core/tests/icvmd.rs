use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sei_core::icvmd::*;
use sei_core::signal::{add_awgn, gen_baseband, ModulationKind, ModulationSpec};
use sei_core::spectral::{fft, relative_l2};
use sei_core::vmd::{vmd_decompose, VmdConfig};
use sei_core::{Complex64, ComplexSignal};

fn tones(freqs: &[f64], n: usize) -> ComplexSignal {
    let s = (0..n)
        .map(|t| {
            freqs
                .iter()
                .map(|f| Complex64::from_polar(1.0, 2.0 * PI * f * t as f64))
                .sum()
        })
        .collect();
    ComplexSignal::normalized(s).unwrap()
}

fn random_complex(n: usize, seed: u64) -> ComplexSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ComplexSignal::normalized(s).unwrap()
}

fn quick(k: usize) -> VmdConfig {
    let mut c = VmdConfig::new(k, 2000.0);
    c.max_iter = 60;
    c
}

fn ncc(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let na: f64 = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    dot.norm() / (na * nb)
}

/// Strongest bins of a one-sided spectrum, refined by zero-padding.
fn dft_peaks(x: &[f64], count: usize) -> Vec<f64> {
    let pad = 16 * x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(pad, Complex64::new(0.0, 0.0));
    let mag: Vec<f64> = fft(&buf)[..=pad / 2].iter().map(|c| c.norm()).collect();
    let mut peaks: Vec<usize> = (1..mag.len() - 1)
        .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]));
    let mut w: Vec<f64> = peaks[..count]
        .iter()
        .map(|&i| 2.0 * PI * i as f64 / pad as f64)
        .collect();
    w.sort_by(f64::total_cmp);
    w
}

#[test]
fn real_input_has_equal_sides() {
    let n = 512;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sig = ComplexSignal::from_real(&x, 1.0).unwrap();
    let p = analytic_split(&sig, DcConvention::DcSplit).unwrap();
    for (a, b) in p.x_plus.iter().zip(&p.x_minus) {
        assert!((a - b).abs() < 1e-9);
    }
    // Zero-mean input: the DC convention no longer matters.
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let p = analytic_split(
        &ComplexSignal::from_real(&centred, 1.0).unwrap(),
        DcConvention::DcToPositive,
    )
    .unwrap();
    for (a, b) in p.x_plus.iter().zip(&p.x_minus) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn hilbert_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..301).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..301).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (a, b) = (1.7, -0.3);
    let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
    let (hx, hy, hm) = (
        hilbert_imag(&x).unwrap(),
        hilbert_imag(&y).unwrap(),
        hilbert_imag(&mix).unwrap(),
    );
    for i in 0..301 {
        assert!((hm[i] - (a * hx[i] + b * hy[i])).abs() < 1e-10);
    }
}

#[test]
fn two_tones_land_on_the_positive_side() {
    let x = tones(&[0.05, 0.25], 1000);
    let mut cfg = IcvmdConfig::shared(VmdConfig::new(2, 2000.0));
    cfg.partition.n_signal_modes = 2;
    let r = icvmd_decompose(&x, &cfg).unwrap();
    let pair = analytic_split(&x, DcConvention::DcToPositive).unwrap();
    let oracle = dft_peaks(&pair.x_plus, 2);
    for (w, o) in r.pos_modes.mode_set.omegas.iter().zip(&oracle) {
        assert!((w - o).abs() < 0.01, "{w} vs {o}");
        assert!((w - 2.0 * PI * [0.05, 0.25][(o > &1.0) as usize]).abs() < 0.01);
    }
    let neg: f64 = (0..2).map(|k| r.neg_modes.mode_energy(k)).sum();
    assert!(neg <= 1e-8);
}

#[test]
fn negative_tone_lands_on_the_negative_side() {
    let x = tones(&[-0.1], 1000);
    let r = icvmd_decompose(&x, &IcvmdConfig::shared(quick(2))).unwrap();
    let pos: f64 =
        (0..2).map(|k| r.pos_modes.mode_energy(k)).sum::<f64>() + r.residual_plus().iter().map(|v| v * v).sum::<f64>();
    let neg: f64 = (0..2).map(|k| r.neg_modes.mode_energy(k)).sum::<f64>();
    assert!(pos <= 1e-10 * neg);
}

#[test]
fn real_bpsk_sides_mirror_each_other() {
    let spec = ModulationSpec::new(ModulationKind::Bpsk, 5);
    let bb = gen_baseband(&spec, 1024).unwrap();
    let re: Vec<f64> = bb.samples().iter().map(|c| c.re).collect();
    let x = ComplexSignal::from_real(&re, 1.0).unwrap();
    let cfg = IcvmdConfig::shared(quick(4));
    let r = icvmd_decompose(&x, &cfg).unwrap();
    let pair = analytic_split(&x, cfg.dc_convention).unwrap();
    let once = vmd_decompose(&pair.x_plus, &cfg.pos).unwrap();
    for i in 0..4 {
        let (p, n) = (r.pos_modes.mode_set.omegas[i], r.neg_modes.mode_set.omegas[i]);
        assert!((p - n).abs() < 0.02, "mode {i}: {p} vs {n}");
        assert_eq!(p, once.mode_set.omegas[i]);
    }
}

#[test]
fn full_selection_round_trip() {
    for seed in 0..5 {
        let x = random_complex(257 + 64 * seed as usize, seed);
        let r = icvmd_decompose(&x, &IcvmdConfig::shared(quick(3))).unwrap();
        let y = reconstruct(&r, &full_selection()).unwrap();
        assert!(relative_l2(y.samples(), x.samples()) <= 1e-9);
    }
}

#[test]
fn dc_split_round_trip_with_complex_dc() {
    let mut s = random_complex(200, 4).into_samples();
    for v in &mut s {
        *v += Complex64::new(0.7, -1.3);
    }
    let x = ComplexSignal::normalized(s).unwrap();
    let mut cfg = IcvmdConfig::shared(quick(3));
    cfg.dc_convention = DcConvention::DcSplit;
    let r = icvmd_decompose(&x, &cfg).unwrap();
    assert!(relative_l2(reconstruct(&r, &full_selection()).unwrap().samples(), x.samples()) <= 1e-9);
}

#[test]
fn empty_selection_is_zero() {
    let x = random_complex(128, 1);
    let r = icvmd_decompose(&x, &IcvmdConfig::shared(quick(2))).unwrap();
    let y = reconstruct(&r, &Selection::new()).unwrap();
    assert_eq!(y.len(), 128);
    assert!(y.samples().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn inconsistent_result_rejected() {
    let x = random_complex(128, 1);
    let mut r = icvmd_decompose(&x, &IcvmdConfig::shared(quick(2))).unwrap();
    r.length = 0;
    assert!(reconstruct(&r, &full_selection()).is_err());
}

#[test]
fn signal_part_denoises_a_tone() {
    let clean = tones(&[0.1], 1024);
    let noisy = add_awgn(&clean, 0.0, 9).unwrap();
    let r = icvmd_decompose(&noisy, &IcvmdConfig::default()).unwrap();
    let y = reconstruct(&r, &restoration()).unwrap();
    assert!(ncc(y.samples(), clean.samples()) > ncc(noisy.samples(), clean.samples()));
}

fn restoration() -> Selection {
    PartitionPolicy::default().restoration_selection()
}

#[test]
fn real_input_is_swap_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sig = ComplexSignal::from_real(&x, 1.0).unwrap();
    for conv in [DcConvention::DcToPositive, DcConvention::DcSplit] {
        let mut cfg = IcvmdConfig::shared(quick(3));
        cfg.dc_convention = conv;
        let r = icvmd_decompose(&sig, &cfg).unwrap();
        let a = reconstruct(&r, &full_selection()).unwrap();
        let b = reconstruct(&r.swapped(), &full_selection()).unwrap();
        assert!(relative_l2(b.samples(), a.samples()) <= 1e-9);
        if conv == DcConvention::DcSplit {
            let sel = restoration();
            let a = reconstruct(&r, &sel).unwrap();
            let b = reconstruct(&r.swapped(), &sel).unwrap();
            assert!(relative_l2(b.samples(), a.samples()) <= 1e-9);
        }
    }
}

#[test]
fn signal_part_stable_when_k_grows() {
    let x = tones(&[0.05, 0.25], 1024);
    let run = |k: usize| {
        let mut cfg = IcvmdConfig::shared(VmdConfig {
            k,
            ..VmdConfig::default()
        });
        cfg.partition.n_signal_modes = 2;
        let r = icvmd_decompose(&x, &cfg).unwrap();
        reconstruct(&r, &cfg.partition.restoration_selection()).unwrap()
    };
    let (a, b) = (run(5), run(6));
    let d = relative_l2(b.samples(), a.samples());
    assert!(d <= 0.1, "relative difference {d}");
}

#[test]
fn probe_alpha_for_two_tones() {
    let x = tones(&[0.05, 0.25], 2048);
    let s = probe_parameters(&x).unwrap();
    assert_eq!(s.peaks, 2);
    // By hand: 0.05·2048 = 102.4 leaks into bins 102 (0.57 of peak power)
    // and 103 (0.25), so the −3 dB width is one bin and 2048/4 rounds to 10^3.
    assert_eq!(s.mean_bandwidth_bins, 1.0);
    assert!((s.alpha.log10() - 3.0).abs() <= 1.0);
    assert_eq!(s.alpha, 1000.0);
}

#[test]
fn mode_dump_sums_back() {
    let x = random_complex(300, 21);
    let r = icvmd_decompose(&x, &IcvmdConfig::shared(quick(3))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = write_mode_dump(dir.path(), &r).unwrap();
    assert_eq!(m.entries.len(), 8);
    let y = reconstruct_from_dump(dir.path(), &full_selection()).unwrap();
    // The files are f32.
    assert!(relative_l2(y.samples(), x.samples()) <= 1e-6);
    let sel = restoration();
    let direct = reconstruct(&r, &sel).unwrap();
    let dumped = reconstruct_from_dump(dir.path(), &sel).unwrap();
    assert!(relative_l2(dumped.samples(), direct.samples()) <= 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_then_reconstruct_is_identity(seed in any::<u64>(), n in 4usize..200, k in 1usize..3) {
        prop_assume!(n >= 2 * k);
        let x = random_complex(n, seed);
        let mut cfg = IcvmdConfig::shared(quick(k));
        cfg.partition.n_signal_modes = k.min(1);
        let r = icvmd_decompose(&x, &cfg).unwrap();
        prop_assert!(relative_l2(reconstruct(&r, &full_selection()).unwrap().samples(), x.samples()) <= 1e-9);
    }

    #[test]
    fn every_mode_has_one_label(seed in any::<u64>(), kp in 1usize..5, kn in 1usize..5, ns in 0usize..2) {
        let x = random_complex(128, seed);
        let mut cfg = IcvmdConfig { pos: quick(kp), neg: quick(kn), ..Default::default() };
        cfg.partition.n_signal_modes = ns;
        let r = icvmd_decompose(&x, &cfg).unwrap();
        prop_assert_eq!(r.labels.pos.len(), kp);
        prop_assert_eq!(r.labels.neg.len(), kn);
        prop_assert_eq!(r.labels.pos.iter().filter(|l| **l == ModeLabel::SignalPart).count(), ns);
    }

    #[test]
    fn probe_ignores_spectral_phase(seed in any::<u64>()) {
        let x = tones(&[0.07, 0.31, -0.2], 512);
        let mut spec = fft(x.samples());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut spec {
            *v *= Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
        }
        let y = ComplexSignal::normalized(sei_core::spectral::ifft(&spec)).unwrap();
        prop_assert_eq!(probe_parameters(&x).unwrap(), probe_parameters(&y).unwrap());
    }
}
