use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::centroid::NearestCentroid;
use super::dataset::{generate_dataset, mix, stratified_split, subsample_per_class, Dataset, DatasetSpec, Split};
use super::features::{extract_features, raw_features, FeatureConfig};
use super::report::{csv_rows, evaluate, ExperimentReport, Prediction, ReportRow};
use crate::icvmd::{icvmd_decompose, reconstruct, Component, Selection};
use crate::nn::{predict, sat_transfer, train, ArchConfig, Decision, NetParams, Sample, TrainConfig};
use crate::signal::{default_linear_stage, EmitterProfile};
use crate::{ComplexSignal, Error, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Nearest centroid on cumulants of the raw signal.
    RawFeatures,
    /// Nearest centroid on decomposition features.
    IcvmdFeatures,
    /// Toy network on raw I/Q, no attention branch.
    RawCnnProxy,
    /// Network on FeaturePart/SignalPart inputs, trained from scratch.
    IcvmdTcn,
    /// Same network with an auxiliary-pretrained, frozen attention branch.
    IcvmdSat,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [
        Pipeline::RawFeatures,
        Pipeline::IcvmdFeatures,
        Pipeline::RawCnnProxy,
        Pipeline::IcvmdTcn,
        Pipeline::IcvmdSat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::RawFeatures => "raw-features",
            Pipeline::IcvmdFeatures => "icvmd-features",
            Pipeline::RawCnnProxy => "raw-cnn-proxy",
            Pipeline::IcvmdTcn => "icvmd-tcn",
            Pipeline::IcvmdSat => "icvmd-sat",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param(format!("unknown pipeline '{s}'")))
    }
}

/// Emitters for pretraining the attention branch: the reference sparsity
/// (`b2 = b4 = 0`, `b1 = 1`) with `b3`, `b5` uniform in `range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSpec {
    #[serde(default = "default_aux_emitters")]
    pub n_emitters: usize,
    #[serde(default = "default_aux_range")]
    pub coeff_range: (f64, f64),
    #[serde(default = "default_aux_seed")]
    pub seed: u64,
    #[serde(default)]
    pub pretrain: TrainConfig,
}

fn default_aux_emitters() -> usize {
    5
}
fn default_aux_range() -> (f64, f64) {
    (0.1, 0.5)
}
fn default_aux_seed() -> u64 {
    0xA0C5
}

impl Default for AuxSpec {
    fn default() -> Self {
        Self {
            n_emitters: default_aux_emitters(),
            coeff_range: default_aux_range(),
            seed: default_aux_seed(),
            pretrain: TrainConfig::default(),
        }
    }
}

pub fn aux_profiles(aux: &AuxSpec) -> Result<Vec<EmitterProfile>> {
    let (lo, hi) = aux.coeff_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::param(format!("aux coefficient range ({lo}, {hi}) is empty")));
    }
    if aux.n_emitters < 2 {
        return Err(Error::param("the auxiliary set needs at least 2 emitters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(aux.seed);
    (0..aux.n_emitters)
        .map(|i| {
            let b3 = rng.random_range(lo..hi);
            let b5 = rng.random_range(lo..hi);
            EmitterProfile::new(
                format!("Aux{}", i + 1),
                vec![1.0, 0.0, b3, 0.0, b5],
                default_linear_stage(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Architecture template; `n_classes` is set per task.
    #[serde(default = "default_arch")]
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub aux: AuxSpec,
}

fn default_arch() -> ArchConfig {
    ArchConfig::new(2)
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            arch: default_arch(),
            train: TrainConfig::default(),
            aux: AuxSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_proportions")]
    pub proportions: Vec<f64>,
    #[serde(default)]
    pub network: NetworkSpec,
}

fn default_test_fraction() -> f64 {
    0.3
}

fn default_proportions() -> Vec<f64> {
    vec![0.3, 0.1, 0.03]
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: DatasetSpec::default(),
            features: FeatureConfig::default(),
            test_fraction: default_test_fraction(),
            split_seed: 0,
            proportions: default_proportions(),
            network: NetworkSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::param(format!(
                "experiment spec schema_version {} is not {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.dataset.validate()?;
        self.features.validate()?;
        if let Some(p) = self.proportions.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::param(format!("proportion {p} outside (0, 1]")));
        }
        self.network.train.validate()?;
        self.network.aux.pretrain.validate()?;
        self.arch(self.dataset.emitters.len())?;
        Ok(())
    }

    pub fn arch(&self, n_classes: usize) -> Result<ArchConfig> {
        let arch = ArchConfig {
            n_classes,
            ..self.network.arch.clone()
        };
        arch.validate()?;
        Ok(arch)
    }

    fn seeds(&self) -> BTreeMap<String, u64> {
        BTreeMap::from([
            ("dataset".to_string(), self.dataset.seed),
            ("split".to_string(), self.split_seed),
            ("train".to_string(), self.network.train.seed),
            ("aux".to_string(), self.network.aux.seed),
        ])
    }
}

fn signal_selection() -> Selection {
    Selection::from([Component::SignalPart])
}

fn feature_selection() -> Selection {
    Selection::from([Component::FeaturePart])
}

/// Main input = FeaturePart, branch input = the restoration selection.
pub fn icvmd_sample(x: &ComplexSignal, cfg: &FeatureConfig, label: usize) -> Result<Sample> {
    let r = icvmd_decompose(x, &cfg.icvmd)?;
    let main = reconstruct(&r, &feature_selection())?;
    let mut restore = cfg.icvmd.partition.restoration_selection();
    if restore.is_empty() {
        restore = signal_selection();
    }
    let branch = reconstruct(&r, &restore)?;
    Sample::new(&main, &branch, label)
}

/// Per-signal model inputs in dataset order.
pub enum Inputs {
    Features(Vec<Vec<f64>>),
    Samples(Vec<Sample>),
}

pub fn prepare_inputs(data: &Dataset, pipeline: Pipeline, cfg: &FeatureConfig) -> Result<Inputs> {
    let labels = data.labels();
    let items: Vec<(&ComplexSignal, usize)> = data.signals.iter().zip(labels).collect();
    Ok(match pipeline {
        Pipeline::RawFeatures => {
            Inputs::Features(items.par_iter().map(|(x, _)| raw_features(x)).collect::<Result<_>>()?)
        }
        Pipeline::IcvmdFeatures => Inputs::Features(
            items
                .par_iter()
                .map(|(x, _)| extract_features(&icvmd_decompose(x, &cfg.icvmd)?, cfg.retained_modes))
                .collect::<Result<_>>()?,
        ),
        Pipeline::RawCnnProxy => Inputs::Samples(
            items
                .par_iter()
                .map(|(x, l)| Sample::new(x, x, *l))
                .collect::<Result<_>>()?,
        ),
        Pipeline::IcvmdTcn | Pipeline::IcvmdSat => Inputs::Samples(
            items
                .par_iter()
                .map(|(x, l)| icvmd_sample(x, cfg, *l))
                .collect::<Result<_>>()?,
        ),
    })
}

/// Attention branch pretrained on the auxiliary emitters.
pub fn pretrain_branch(spec: &ExperimentSpec) -> Result<NetParams> {
    let aux = &spec.network.aux;
    let aux_spec = DatasetSpec {
        emitters: aux_profiles(aux)?,
        seed: mix(spec.dataset.seed, aux.seed),
        ..spec.dataset.clone()
    };
    let data = Dataset::simulate(&aux_spec)?;
    let Inputs::Samples(samples) = prepare_inputs(&data, Pipeline::IcvmdSat, &spec.features)? else {
        unreachable!("network pipelines prepare samples")
    };
    let init = NetParams::init(&spec.arch(aux.n_emitters)?, aux.pretrain.seed)?;
    Ok(train(&samples, &aux.pretrain, init)?.params)
}

fn fit_and_predict(
    spec: &ExperimentSpec,
    pipeline: Pipeline,
    inputs: &Inputs,
    labels: &[usize],
    n_classes: usize,
    train_idx: &[usize],
    test_idx: &[usize],
    pretrained: Option<&NetParams>,
) -> Result<Vec<usize>> {
    match inputs {
        Inputs::Features(f) => {
            let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| f[i].clone()).collect();
            let y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let nc = NearestCentroid::fit(&x, &y, n_classes)?;
            test_idx.iter().map(|&i| nc.classify(&f[i])).collect()
        }
        Inputs::Samples(s) => {
            let train_set: Vec<Sample> = train_idx.iter().map(|&i| s[i].clone()).collect();
            let cfg = &spec.network.train;
            let params = match (pipeline, pretrained) {
                (Pipeline::IcvmdSat, Some(p)) => sat_transfer(p, &train_set, n_classes, cfg)?.params,
                (Pipeline::IcvmdSat, None) => return Err(Error::param("transfer needs a pretrained model")),
                _ => {
                    let mut arch = spec.arch(n_classes)?;
                    if pipeline == Pipeline::RawCnnProxy {
                        arch.branch = None;
                    }
                    train(&train_set, cfg, NetParams::init(&arch, cfg.seed)?)?.params
                }
            };
            test_idx
                .par_iter()
                .map(|&i| predict(&params, &s[i], Decision::Soft))
                .collect()
        }
    }
}

/// Few-shot sweep over `spec.proportions` on an already loaded dataset.
pub fn run_fewshot_on(spec: &ExperimentSpec, data: &Dataset, pipeline: Pipeline) -> Result<Vec<ReportRow>> {
    spec.validate()?;
    let n_classes = data.n_classes();
    let labels = data.labels();
    let split = stratified_split(&data.manifest.entries, spec.test_fraction, spec.split_seed)?;
    let inputs = prepare_inputs(data, pipeline, &spec.features)?;
    let pretrained = if pipeline == Pipeline::IcvmdSat {
        Some(pretrain_branch(spec)?)
    } else {
        None
    };
    let config = serde_json::to_value(spec)?;
    let mut rows = Vec::with_capacity(spec.proportions.len());
    for &p in &spec.proportions {
        let start = Instant::now();
        let subset = subsample_per_class(&split.train, &labels, n_classes, p, mix(spec.split_seed, p.to_bits()))?;
        let report = match subset {
            None => None,
            Some(train_idx) => {
                let predicted = fit_and_predict(
                    spec,
                    pipeline,
                    &inputs,
                    &labels,
                    n_classes,
                    &train_idx,
                    &split.test,
                    pretrained.as_ref(),
                )?;
                let preds = score(data, &split, &predicted);
                let mut r = evaluate(pipeline.name(), p, &preds, n_classes)?;
                r.config = config.clone();
                r.seeds = spec.seeds();
                r.wall_clock_s = start.elapsed().as_secs_f64();
                Some(r)
            }
        };
        rows.push(ReportRow {
            pipeline: pipeline.name().to_string(),
            proportion: p,
            report,
        });
    }
    Ok(rows)
}

fn score(data: &Dataset, split: &Split, predicted: &[usize]) -> Vec<Prediction> {
    split
        .test
        .iter()
        .zip(predicted)
        .map(|(&i, &p)| {
            let e = &data.manifest.entries[i];
            Prediction {
                label: e.label,
                predicted: p,
                snr_db: e.snr_db,
            }
        })
        .collect()
}

/// Few-shot sweep on a freshly simulated dataset.
pub fn run_fewshot(spec: &ExperimentSpec, pipeline: Pipeline) -> Result<Vec<ReportRow>> {
    spec.validate()?;
    run_fewshot_on(spec, &Dataset::simulate(&spec.dataset)?, pipeline)
}

/// Whole training split, no subsampling.
pub fn evaluate_pipeline(spec: &ExperimentSpec, data: &Dataset, pipeline: Pipeline) -> Result<ExperimentReport> {
    let full = ExperimentSpec {
        proportions: vec![1.0],
        ..spec.clone()
    };
    let mut rows = run_fewshot_on(&full, data, pipeline)?;
    rows.pop()
        .and_then(|r| r.report)
        .ok_or_else(|| Error::degenerate("training split leaves a class without samples"))
}

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const DATASET_DIR: &str = "dataset";

/// Generates the dataset under `out_dir/dataset`, reads it back and runs
/// every pipeline, writing `report.csv` and `report.json`.
pub fn run_experiment(spec: &ExperimentSpec, pipelines: &[Pipeline], out_dir: &Path) -> Result<Vec<ReportRow>> {
    spec.validate()?;
    let dir = out_dir.join(DATASET_DIR);
    generate_dataset(&spec.dataset, &dir)?;
    let data = Dataset::load(&dir)?;
    let mut rows = Vec::new();
    for &p in pipelines {
        rows.extend(run_fewshot_on(spec, &data, p)?);
    }
    write_reports(out_dir, &rows)?;
    Ok(rows)
}

pub fn write_reports(out_dir: &Path, rows: &[ReportRow]) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(REPORT_CSV), csv_rows(rows))?;
    fs::write(out_dir.join(REPORT_JSON), serde_json::to_vec_pretty(rows)?)?;
    Ok(())
}

/// Configuration for `train`/`eval` on a generated dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainJob {
    pub schema_version: u32,
    /// `icvmd-tcn` or `raw-cnn-proxy`.
    #[serde(default = "default_job_pipeline")]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default = "default_arch")]
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_job_pipeline() -> Pipeline {
    Pipeline::IcvmdTcn
}

impl Default for TrainJob {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            pipeline: default_job_pipeline(),
            features: FeatureConfig::default(),
            arch: default_arch(),
            train: TrainConfig::default(),
            test_fraction: default_test_fraction(),
            split_seed: 0,
        }
    }
}

impl TrainJob {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::param(format!(
                "train config schema_version {} is not {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if !matches!(self.pipeline, Pipeline::IcvmdTcn | Pipeline::RawCnnProxy) {
            return Err(Error::param(format!(
                "train supports icvmd-tcn and raw-cnn-proxy, not {}",
                self.pipeline
            )));
        }
        self.features.validate()?;
        self.train.validate()
    }

    fn arch_for(&self, n_classes: usize) -> Result<ArchConfig> {
        let mut arch = ArchConfig {
            n_classes,
            ..self.arch.clone()
        };
        if self.pipeline == Pipeline::RawCnnProxy {
            arch.branch = None;
        }
        arch.validate()?;
        Ok(arch)
    }

    fn samples(&self, data: &Dataset) -> Result<Vec<Sample>> {
        match prepare_inputs(data, self.pipeline, &self.features)? {
            Inputs::Samples(s) => Ok(s),
            Inputs::Features(_) => Err(Error::param("network job prepared feature vectors")),
        }
    }
}

/// Trains on the job's training split. Returns the parameters and the
/// per-epoch loss.
pub fn run_train_job(job: &TrainJob, data: &Dataset) -> Result<(NetParams, Vec<f64>)> {
    job.validate()?;
    let split = stratified_split(&data.manifest.entries, job.test_fraction, job.split_seed)?;
    let samples = job.samples(data)?;
    let train_set: Vec<Sample> = split.train.iter().map(|&i| samples[i].clone()).collect();
    let init = NetParams::init(&job.arch_for(data.n_classes())?, job.train.seed)?;
    let out = train(&train_set, &job.train, init)?;
    Ok((out.params, out.history))
}

/// Scores `params` on the job's test split.
pub fn run_eval_job(job: &TrainJob, data: &Dataset, params: &NetParams) -> Result<ExperimentReport> {
    job.validate()?;
    let start = Instant::now();
    let split = stratified_split(&data.manifest.entries, job.test_fraction, job.split_seed)?;
    let samples = job.samples(data)?;
    let predicted = split
        .test
        .par_iter()
        .map(|&i| predict(params, &samples[i], Decision::Soft))
        .collect::<Result<Vec<_>>>()?;
    let mut r = evaluate(
        job.pipeline.name(),
        1.0,
        &score(data, &split, &predicted),
        params.arch.n_classes,
    )?;
    r.config = serde_json::to_value(job)?;
    r.seeds = BTreeMap::from([
        ("split".to_string(), job.split_seed),
        ("train".to_string(), job.train.seed),
    ]);
    r.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(r)
}
