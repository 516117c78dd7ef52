use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sei_core::harness::*;
use sei_core::icvmd::{icvmd_decompose, IcvmdConfig};
use sei_core::signal::{
    gen_baseband, hammerstein_apply, normalize_power, reference_emitters, ModulationKind, ModulationSpec,
};
use sei_core::vmd::VmdConfig;
use sei_core::{ComplexSignal, Error, SCHEMA_VERSION};

fn small_spec(per_emitter: usize, snrs: &[f64], n: usize) -> DatasetSpec {
    DatasetSpec {
        snr_grid_db: snrs.to_vec(),
        n_samples: n,
        signals_per_emitter: per_emitter,
        ..DatasetSpec::default()
    }
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn default_grid_covers_every_emitter_modulation_and_snr() {
    let m = plan_dataset(&DatasetSpec::default()).unwrap();
    let emitters: BTreeSet<_> = m.entries.iter().map(|e| e.emitter_id.clone()).collect();
    let mods: BTreeSet<_> = m.entries.iter().map(|e| e.modulation).collect();
    let snrs: BTreeSet<i64> = m.entries.iter().map(|e| e.snr_db as i64).collect();
    assert_eq!(emitters.len(), 7);
    assert_eq!(mods.len(), 6);
    assert_eq!(snrs, (-4..=20).step_by(2).collect());
    assert_eq!(m.entries.len(), 7 * 13 * 60);
}

#[test]
fn six_signals_give_one_per_modulation() {
    let m = plan_dataset(&small_spec(6, &[0.0, 10.0], 128)).unwrap();
    let mut cells: BTreeMap<(usize, i64, ModulationKind), usize> = BTreeMap::new();
    for e in &m.entries {
        *cells.entry((e.label, e.snr_db as i64, e.modulation)).or_default() += 1;
    }
    assert_eq!(cells.len(), 7 * 2 * 6);
    assert!(cells.values().all(|&c| c == 1));
}

#[test]
fn remainder_goes_to_the_first_modulations() {
    let spec = small_spec(8, &[0.0], 128);
    assert_eq!(spec.per_modulation(), vec![2, 2, 1, 1, 1, 1]);
}

#[test]
fn invalid_specs_rejected() {
    let ok = small_spec(6, &[0.0], 128);
    for bad in [
        DatasetSpec {
            emitters: vec![],
            ..ok.clone()
        },
        DatasetSpec {
            modulations: vec![],
            ..ok.clone()
        },
        DatasetSpec {
            snr_grid_db: vec![],
            ..ok.clone()
        },
        DatasetSpec {
            n_samples: 63,
            ..ok.clone()
        },
        DatasetSpec {
            schema_version: SCHEMA_VERSION + 1,
            ..ok.clone()
        },
    ] {
        assert!(matches!(plan_dataset(&bad), Err(Error::Parameter(_))));
    }
}

#[test]
fn generation_is_byte_identical() {
    let spec = small_spec(6, &[-4.0, 18.0], 128);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_dataset(&spec, a.path()).unwrap();
    generate_dataset(&spec, b.path()).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert_eq!(ta.len(), 2 * 7 * 2 * 6 + 1);
    assert_eq!(ta, tb);
}

#[test]
fn loaded_dataset_matches_simulation() {
    let spec = small_spec(6, &[4.0], 96);
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&spec, dir.path()).unwrap();
    let loaded = Dataset::load(dir.path()).unwrap();
    let sim = Dataset::simulate(&spec).unwrap();
    assert_eq!(loaded.manifest, sim.manifest);
    assert_eq!(loaded.signals, sim.signals);
}

#[test]
fn sub_grid_reproduces_matching_signals() {
    let full = Dataset::simulate(&small_spec(6, &[-4.0, 18.0], 96)).unwrap();
    let part = Dataset::simulate(&small_spec(6, &[18.0], 96)).unwrap();
    let at18: Vec<&ComplexSignal> = full
        .manifest
        .entries
        .iter()
        .zip(&full.signals)
        .filter(|(e, _)| e.snr_db == 18.0)
        .map(|(_, s)| s)
        .collect();
    assert_eq!(at18.len(), part.len());
    assert!(at18.iter().zip(&part.signals).all(|(a, b)| *a == b));
}

#[test]
fn noiseless_signal_is_the_pa_output() {
    let spec = small_spec(6, &[300.0], 256);
    let data = Dataset::simulate(&spec).unwrap();
    let profiles = reference_emitters();
    for (e, x) in data.manifest.entries.iter().zip(&data.signals) {
        let base = gen_baseband(&ModulationSpec::new(e.modulation, e.seed), 256).unwrap();
        let want = hammerstein_apply(&normalize_power(&base).unwrap(), &profiles[e.label]).unwrap();
        for (a, b) in x.samples().iter().zip(want.samples()) {
            assert!((a - b).norm() < 1e-6, "{}", e.file);
        }
    }
}

#[test]
fn sidecars_carry_labels() {
    let spec = small_spec(6, &[0.0], 64);
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&spec, dir.path()).unwrap();
    for e in m.entries.iter().step_by(5) {
        let (_, side) = sei_core::iq::read_signal(&dir.path().join(&e.file)).unwrap();
        let side = side.unwrap();
        assert_eq!((side.label, side.seed, side.snr_db), (e.label, e.seed, e.snr_db));
        assert_eq!(side.modulation, e.modulation.name());
    }
}

#[test]
fn split_is_stratified_and_disjoint() {
    let m = plan_dataset(&small_spec(10, &[-4.0, 6.0, 18.0], 64)).unwrap();
    let s = stratified_split(&m.entries, 0.3, 9).unwrap();
    let files = |idx: &[usize]| idx.iter().map(|&i| m.entries[i].file.clone()).collect::<BTreeSet<_>>();
    assert!(files(&s.train).is_disjoint(&files(&s.test)));
    assert_eq!(s.train.len() + s.test.len(), m.entries.len());
    let mut per_group: BTreeMap<(usize, i64), usize> = BTreeMap::new();
    for &i in &s.test {
        *per_group
            .entry((m.entries[i].label, m.entries[i].snr_db as i64))
            .or_default() += 1;
    }
    assert_eq!(per_group.len(), 7 * 3);
    assert!(per_group.values().all(|&n| n == 3));
    assert_eq!(s, stratified_split(&m.entries, 0.3, 9).unwrap());
    assert_ne!(s, stratified_split(&m.entries, 0.3, 10).unwrap());
}

#[test]
fn subsample_counts_per_class() {
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let idx: Vec<usize> = (0..40).collect();
    let all = subsample_per_class(&idx, &labels, 4, 1.0, 0).unwrap().unwrap();
    assert_eq!(all, idx);
    let some = subsample_per_class(&idx, &labels, 4, 0.3, 0).unwrap().unwrap();
    assert_eq!(some.len(), 12);
    assert!(subsample_per_class(&idx, &labels, 4, 0.05, 0).unwrap().is_none());
    assert!(subsample_per_class(&idx, &labels, 4, 0.0, 0).is_err());
}

#[test]
fn constant_reconstruction_has_no_variance() {
    let a = 2.5;
    let c = cumulants(&vec![Complex64::new(a, 0.0); 300]).unwrap();
    assert!(c.c21.abs() < 1e-12);
    assert!(c.magnitudes().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn gaussian_fourth_order_cumulants_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let y: Vec<Complex64> = (0..100_000)
        .map(|_| Complex64::new(g.sample(&mut rng), g.sample(&mut rng)))
        .collect();
    let c = cumulants(&y).unwrap();
    assert!(c.c40.norm() <= 0.05, "{}", c.c40);
    assert!(c.c42.abs() <= 0.05);
    assert!((c.c21 - 1.0).abs() < 0.02);
}

#[test]
fn psk_cumulants_match_theory() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bpsk: Vec<Complex64> = (0..50_000)
        .map(|_| Complex64::new(if rng.random() { 1.0 } else { -1.0 }, 0.0))
        .collect();
    let c = cumulants(&bpsk).unwrap();
    assert!((c.c20.re - 1.0).abs() < 0.02 && (c.c40.re + 2.0).abs() < 0.05 && (c.c42 + 2.0).abs() < 0.05);
    let qpsk: Vec<Complex64> = (0..50_000)
        .map(|_| {
            Complex64::from_polar(
                1.0,
                std::f64::consts::FRAC_PI_2 * rng.random_range(0..4) as f64 + 0.25 * std::f64::consts::PI,
            )
        })
        .collect();
    let c = cumulants(&qpsk).unwrap();
    assert!(c.c20.norm() < 0.02 && (c.c40.re + 1.0).abs() < 0.05 && (c.c42 + 1.0).abs() < 0.05);
}

#[test]
fn padding_fills_missing_slots_with_zeros() {
    let stat = |e: f64| ModeStat {
        side: sei_core::icvmd::Side::Pos,
        index: 0,
        omega: 0.3,
        bandwidth: 0.1,
        energy_fraction: e,
    };
    let packed = pack_modes(&[stat(1.0 / 6.0), stat(5.0 / 6.0)], 3);
    assert_eq!(packed.len(), 9);
    assert_eq!(packed[2], 5.0 / 6.0);
    assert_eq!(packed[5], 1.0 / 6.0);
    assert_eq!(&packed[6..], &[0.0, 0.0, 0.0]);
}

#[test]
fn no_feature_modes_is_degenerate() {
    let x = ComplexSignal::normalized((0..256).map(|t| Complex64::from_polar(1.0, 0.4 * t as f64)).collect()).unwrap();
    let r = icvmd_decompose(&x, &IcvmdConfig::shared(VmdConfig::new(1, 50.0))).unwrap();
    assert!(matches!(extract_features(&r, 2), Err(Error::Degenerate(_))));
}

fn fixture_signal(seed: u64, n: usize) -> ComplexSignal {
    let spec = small_spec(6, &[6.0], n);
    let m = plan_dataset(&spec).unwrap();
    synthesize(&spec, &m.entries[seed as usize % m.entries.len()]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn feature_layout_is_fixed(seed in 0u64..42, slots in 1usize..6) {
        let x = fixture_signal(seed, 256);
        let cfg = FeatureConfig { retained_modes: slots, ..FeatureConfig::default() };
        let r = icvmd_decompose(&x, &cfg.icvmd).unwrap();
        let f = extract_features(&r, slots).unwrap();
        prop_assert_eq!(f.len(), cfg.dim());
        prop_assert_eq!(feature_names(slots).len(), cfg.dim());
        prop_assert!(f.iter().all(|v| v.is_finite()));
        let energies: Vec<f64> = (0..slots).map(|i| f[3 * i + 2]).collect();
        prop_assert!(energies.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn overall_accuracy_is_weighted_recall(preds in prop::collection::vec((0usize..4, 0usize..4, 0usize..3), 1..80)) {
        let p: Vec<Prediction> = preds.iter().map(|&(l, q, s)| Prediction { label: l, predicted: q, snr_db: s as f64 * 4.0 }).collect();
        let r = evaluate("x", 1.0, &p, 4).unwrap();
        let supports: Vec<usize> = r.confusion.iter().map(|row| row.iter().sum()).collect();
        let weighted: f64 = r.recalls().iter().zip(&supports).map(|(rc, &n)| rc.unwrap_or(0.0) * n as f64).sum::<f64>() / p.len() as f64;
        prop_assert!((weighted - r.accuracy).abs() < 1e-12);
        for c in 0..4 {
            prop_assert_eq!(supports[c], p.iter().filter(|x| x.label == c).count());
        }
        prop_assert!(r.per_snr.iter().all(|s| (0.0..=1.0).contains(&s.accuracy)));
    }
}

#[test]
fn one_point_per_class_classifies_itself() {
    let x = vec![vec![0.0, 1.0], vec![3.0, -2.0], vec![7.0, 4.0]];
    let nc = NearestCentroid::fit(&x, &[0, 1, 2], 3).unwrap();
    for (i, f) in x.iter().enumerate() {
        assert_eq!(nc.classify(f).unwrap(), i);
    }
}

#[test]
fn equidistant_query_goes_to_lower_class() {
    let x: Vec<Vec<f64>> = [100.0, -100.0, -1.0, 120.0, -120.0, 1.0]
        .iter()
        .map(|&v| vec![v])
        .collect();
    let nc = NearestCentroid::fit(&x, &[0, 1, 2, 3, 4, 5], 6).unwrap();
    assert_eq!(nc.classify(&[0.0]).unwrap(), 2);
}

#[test]
fn hand_distance_comparison() {
    let x = vec![vec![-1.0], vec![1.0], vec![9.0], vec![11.0]];
    let nc = NearestCentroid::fit(&x, &[0, 0, 1, 1], 2).unwrap();
    assert_eq!(nc.classify(&[4.0]).unwrap(), 0);
    assert_eq!(nc.classify(&[6.0]).unwrap(), 1);
}

#[test]
fn constant_dimension_keeps_unit_scale() {
    let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
    let nc = NearestCentroid::fit(&x, &[0, 1], 2).unwrap();
    assert_eq!(nc.scale, vec![1.0, 1.0]);
}

#[test]
fn centroid_errors() {
    let x = vec![vec![0.0], vec![1.0]];
    assert!(NearestCentroid::fit(&x, &[0, 0], 2).is_err());
    assert!(NearestCentroid::fit(&[vec![0.0], vec![1.0, 2.0]], &[0, 1], 2).is_err());
    let nc = NearestCentroid::fit(&x, &[0, 1], 2).unwrap();
    assert!(nc.classify(&[0.0, 1.0]).is_err());
}

#[test]
fn perfect_predictions_give_diagonal_confusion() {
    let p: Vec<Prediction> = (0..12)
        .map(|i| Prediction {
            label: i % 3,
            predicted: i % 3,
            snr_db: (i % 2) as f64,
        })
        .collect();
    let r = evaluate("x", 1.0, &p, 3).unwrap();
    assert_eq!(r.accuracy, 1.0);
    for (i, row) in r.confusion.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, if i == j { 4 } else { 0 });
        }
    }
}

#[test]
fn shuffled_test_order_gives_the_same_report() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p: Vec<Prediction> = (0..60)
        .map(|_| Prediction {
            label: rng.random_range(0..5),
            predicted: rng.random_range(0..5),
            snr_db: [-4.0, 8.0, 18.0][rng.random_range(0..3)],
        })
        .collect();
    let mut q = p.clone();
    q.reverse();
    q.swap(3, 40);
    assert_eq!(evaluate("x", 0.3, &p, 5).unwrap(), evaluate("x", 0.3, &q, 5).unwrap());
}

#[test]
fn unseen_label_is_a_miss_not_a_crash() {
    let p = vec![
        Prediction {
            label: 3,
            predicted: 0,
            snr_db: 0.0,
        },
        Prediction {
            label: 0,
            predicted: 0,
            snr_db: 0.0,
        },
    ];
    let r = evaluate("x", 1.0, &p, 2).unwrap();
    assert_eq!(r.accuracy, 0.5);
    assert_eq!(r.confusion.len(), 4);
    assert!(evaluate("x", 1.0, &[], 2).is_err());
}

#[test]
fn csv_has_one_row_per_snr_and_marks_unsupported_cells() {
    let p = vec![
        Prediction {
            label: 0,
            predicted: 0,
            snr_db: -4.0,
        },
        Prediction {
            label: 1,
            predicted: 0,
            snr_db: 18.0,
        },
    ];
    let rows = vec![
        ReportRow {
            pipeline: "icvmd-features".into(),
            proportion: 0.3,
            report: Some(evaluate("icvmd-features", 0.3, &p, 2).unwrap()),
        },
        ReportRow {
            pipeline: "icvmd-features".into(),
            proportion: 0.01,
            report: None,
        },
    ];
    let csv = csv_rows(&rows);
    assert_eq!(
        csv,
        "pipeline,proportion,snr_db,accuracy,n\nicvmd-features,0.3,-4,1.000000,1\nicvmd-features,0.3,18,0.000000,1\nicvmd-features,0.01,,,0\n"
    );
}

#[test]
fn aux_emitters_follow_the_sparsity_pattern() {
    let aux = AuxSpec::default();
    let p = aux_profiles(&aux).unwrap();
    assert_eq!(p.len(), 5);
    let table: Vec<Vec<f64>> = reference_emitters().into_iter().map(|p| p.b).collect();
    for e in &p {
        assert_eq!((e.b[0], e.b[1], e.b[3]), (1.0, 0.0, 0.0));
        assert!([e.b[2], e.b[4]].iter().all(|v| (0.1..0.5).contains(v)));
        assert!(!table.contains(&e.b));
    }
    assert_eq!(p, aux_profiles(&aux).unwrap());
}

fn feature_spec() -> ExperimentSpec {
    ExperimentSpec {
        dataset: small_spec(30, &[10.0], 256),
        ..ExperimentSpec::default()
    }
}

#[test]
fn three_proportions_three_rows() {
    let rows = run_fewshot(&feature_spec(), Pipeline::RawFeatures).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.proportion).collect::<Vec<_>>(),
        vec![0.3, 0.1, 0.03]
    );
    assert!(rows[..2].iter().all(|r| r.report.is_some()));
    // 21 training signals per class: 3% keeps none.
    assert!(rows[2].report.is_none());
}

#[test]
fn full_proportion_equals_plain_evaluation() {
    let spec = ExperimentSpec {
        proportions: vec![1.0],
        ..feature_spec()
    };
    let data = Dataset::simulate(&spec.dataset).unwrap();
    for pipeline in [Pipeline::RawFeatures, Pipeline::IcvmdFeatures] {
        let plain = evaluate_pipeline(&spec, &data, pipeline).unwrap();
        let rows = run_fewshot_on(&spec, &data, pipeline).unwrap();
        let mut swept = rows[0].report.clone().unwrap();
        swept.wall_clock_s = plain.wall_clock_s;
        assert_eq!(swept, plain);
    }
}

#[test]
fn pipeline_names_round_trip() {
    for p in Pipeline::ALL {
        assert_eq!(p.name().parse::<Pipeline>().unwrap(), p);
        assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.name()));
    }
    assert!("cnn".parse::<Pipeline>().is_err());
}

#[test]
fn experiment_spec_json_defaults() {
    let spec: ExperimentSpec = serde_json::from_str(r#"{"schema_version": 1}"#).unwrap();
    assert_eq!(spec, ExperimentSpec::default());
    let bad: ExperimentSpec = serde_json::from_str(r#"{"schema_version": 7}"#).unwrap();
    assert!(bad.validate().is_err());
}

/// Paired split seeds; the centroid sees ~13 training signals per class at
/// 30% and 1 at 3%.
#[test]
fn more_training_data_does_not_hurt_on_average() {
    let base = ExperimentSpec {
        dataset: DatasetSpec {
            snr_grid_db: vec![18.0],
            ..DatasetSpec::default()
        },
        proportions: vec![0.3, 0.03],
        ..ExperimentSpec::default()
    };
    let data = Dataset::simulate(&base.dataset).unwrap();
    let (mut hi, mut lo) = (0.0, 0.0);
    for seed in 0..5 {
        let spec = ExperimentSpec {
            split_seed: seed,
            ..base.clone()
        };
        let rows = run_fewshot_on(&spec, &data, Pipeline::IcvmdFeatures).unwrap();
        hi += rows[0].report.as_ref().unwrap().accuracy;
        lo += rows[1].report.as_ref().unwrap().accuracy;
    }
    assert!(hi >= lo, "30%: {} 3%: {}", hi / 5.0, lo / 5.0);
}
