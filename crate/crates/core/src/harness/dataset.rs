use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::iq::{self, Sidecar};
use crate::signal::{
    add_awgn, gen_baseband, hammerstein_apply, normalize_power, reference_emitters, EmitterProfile, ModulationKind,
    ModulationSpec,
};
use crate::{ComplexSignal, Error, Result, SCHEMA_VERSION};

pub const DATASET_MANIFEST: &str = "manifest.json";
pub const SIGNAL_DIR: &str = "signals";

/// Everything that determines a simulated dataset.
///
/// `signals_per_emitter` counts signals per emitter at each SNR point, split
/// evenly over the modulations; the remainder goes to the first ones listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub schema_version: u32,
    #[serde(default = "reference_emitters")]
    pub emitters: Vec<EmitterProfile>,
    #[serde(default = "all_modulations")]
    pub modulations: Vec<ModulationKind>,
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_signals_per_emitter")]
    pub signals_per_emitter: usize,
    #[serde(default)]
    pub seed: u64,
}

fn all_modulations() -> Vec<ModulationKind> {
    ModulationKind::ALL.to_vec()
}

/// −4 dB to 20 dB in 2 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..13).map(|i| -4.0 + 2.0 * i as f64).collect()
}

fn default_n_samples() -> usize {
    2100
}

fn default_signals_per_emitter() -> usize {
    60
}

pub const FULL_SCALE_SIGNALS_PER_EMITTER: usize = 1500;

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            emitters: reference_emitters(),
            modulations: all_modulations(),
            snr_grid_db: default_snr_grid(),
            n_samples: default_n_samples(),
            signals_per_emitter: default_signals_per_emitter(),
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::param(format!(
                "dataset spec schema_version {} is not {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.emitters.is_empty() || self.modulations.is_empty() || self.snr_grid_db.is_empty() {
            return Err(Error::param("emitters, modulations and the SNR grid must be nonempty"));
        }
        for p in &self.emitters {
            p.validate()?;
        }
        if let Some(s) = self.snr_grid_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::param(format!("SNR {s} is not finite")));
        }
        if self.n_samples < 64 {
            return Err(Error::param(format!(
                "n_samples must be at least 64, got {}",
                self.n_samples
            )));
        }
        if self.signals_per_emitter == 0 {
            return Err(Error::param("signals_per_emitter must be at least 1"));
        }
        Ok(())
    }

    /// How many signals of each modulation an emitter gets per SNR point.
    pub fn per_modulation(&self) -> Vec<usize> {
        let m = self.modulations.len();
        let (q, r) = (self.signals_per_emitter / m, self.signals_per_emitter % m);
        (0..m).map(|i| q + usize::from(i < r)).collect()
    }

    pub fn n_signals(&self) -> usize {
        self.emitters.len() * self.snr_grid_db.len() * self.signals_per_emitter
    }
}

/// One generated signal, in manifest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the dataset directory.
    pub file: String,
    pub label: usize,
    pub emitter_id: String,
    pub modulation: ModulationKind,
    pub snr_db: f64,
    pub repetition: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub spec: DatasetSpec,
    pub entries: Vec<ManifestEntry>,
}

/// SplitMix64 finalizer, used to derive independent per-signal seeds.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one signal. It depends on the SNR value, not its grid position,
/// so a dataset over a sub-grid reproduces the matching signals exactly.
fn signal_seed(base: u64, emitter: usize, modulation: ModulationKind, snr_db: f64, rep: usize) -> u64 {
    let m = ModulationKind::ALL.iter().position(|k| *k == modulation).unwrap_or(0) as u64;
    [emitter as u64, m, snr_db.to_bits(), rep as u64]
        .into_iter()
        .fold(base, mix)
}

fn snr_tag(snr_db: f64) -> String {
    let sign = if snr_db < 0.0 { "m" } else { "p" };
    format!("{sign}{}", snr_db.abs()).replace('.', "_")
}

/// Planned manifest without touching any file.
pub fn plan_dataset(spec: &DatasetSpec) -> Result<DatasetManifest> {
    spec.validate()?;
    let counts = spec.per_modulation();
    let mut entries = Vec::with_capacity(spec.n_signals());
    for (e, profile) in spec.emitters.iter().enumerate() {
        for &snr in &spec.snr_grid_db {
            for (&m, &count) in spec.modulations.iter().zip(&counts) {
                for rep in 0..count {
                    entries.push(ManifestEntry {
                        file: format!("{SIGNAL_DIR}/e{e:02}_{m}_{}_{rep:04}.iqf32", snr_tag(snr)),
                        label: e,
                        emitter_id: profile.name.clone(),
                        modulation: m,
                        snr_db: snr,
                        repetition: rep,
                        seed: signal_seed(spec.seed, e, m, snr, rep),
                    });
                }
            }
        }
    }
    Ok(DatasetManifest {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        entries,
    })
}

/// Baseband → unit power → PA → AWGN, stored at f32 precision.
pub fn synthesize(spec: &DatasetSpec, entry: &ManifestEntry) -> Result<ComplexSignal> {
    let profile = &spec.emitters[entry.label];
    let x = gen_baseband(&ModulationSpec::new(entry.modulation, entry.seed), spec.n_samples)?;
    let y = hammerstein_apply(&normalize_power(&x)?, profile)?;
    Ok(add_awgn(&y, entry.snr_db, mix(entry.seed, 0xA36))?.quantized_f32())
}

fn sidecar(entry: &ManifestEntry) -> Sidecar {
    Sidecar {
        sample_rate: 1.0,
        label: entry.label,
        modulation: entry.modulation.name().to_string(),
        snr_db: entry.snr_db,
        seed: entry.seed,
        emitter_id: entry.emitter_id.clone(),
    }
}

/// Writes every signal with its sidecar plus `manifest.json` under `out_dir`.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<DatasetManifest> {
    let manifest = plan_dataset(spec)?;
    fs::create_dir_all(out_dir.join(SIGNAL_DIR))?;
    manifest.entries.par_iter().try_for_each(|entry| {
        let x = synthesize(spec, entry)?;
        iq::write_signal(&out_dir.join(&entry.file), &x, Some(&sidecar(entry)))
    })?;
    fs::write(out_dir.join(DATASET_MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// In-memory dataset: manifest order, signals as stored on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub signals: Vec<ComplexSignal>,
}

impl Dataset {
    /// Synthesizes without writing; identical to reading back a generated set.
    pub fn simulate(spec: &DatasetSpec) -> Result<Self> {
        let manifest = plan_dataset(spec)?;
        let signals = manifest
            .entries
            .par_iter()
            .map(|e| synthesize(spec, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, signals })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join(DATASET_MANIFEST))?)?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "dataset manifest schema_version {}",
                manifest.schema_version
            )));
        }
        let signals = manifest
            .entries
            .par_iter()
            .map(|e| iq::read_signal(&dir.join(&e.file)).map(|(x, _)| x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, signals })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.manifest.spec.emitters.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.manifest.entries.iter().map(|e| e.label).collect()
    }
}

/// Train/test index lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified by `(label, snr)`: each group sends `floor(n·test_fraction)`
/// members (at least one when the group has two or more) to the test side.
pub fn stratified_split(entries: &[ManifestEntry], test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut groups: Vec<((usize, u64), Vec<usize>)> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let key = (e.label, e.snr_db.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for ((label, snr_bits), mut members) in groups {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, label as u64), snr_bits));
        members.shuffle(&mut rng);
        let n = members.len();
        let n_test = if n < 2 {
            0
        } else {
            ((n as f64 * test_fraction) as usize).clamp(1, n - 1)
        };
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// `floor(proportion·n_c)` training indices per class, drawn with `seed`.
/// `None` when some class would end up empty.
pub fn subsample_per_class(
    indices: &[usize],
    labels: &[usize],
    n_classes: usize,
    proportion: f64,
    seed: u64,
) -> Result<Option<Vec<usize>>> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(Error::param(format!("proportion must lie in (0, 1], got {proportion}")));
    }
    let mut out = Vec::new();
    for c in 0..n_classes {
        let mut members: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == c).collect();
        let keep = (members.len() as f64 * proportion + 1e-9).floor() as usize;
        if keep == 0 {
            return Ok(None);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, c as u64));
        members.shuffle(&mut rng);
        members.truncate(keep);
        out.extend(members);
    }
    out.sort_unstable();
    Ok(Some(out))
}
