//! Dataset generation, feature extraction, the centroid baseline and the
//! few-shot experiment driver.

mod centroid;
mod dataset;
mod experiment;
mod features;
mod report;

pub use centroid::NearestCentroid;
pub use dataset::{
    default_snr_grid, generate_dataset, plan_dataset, stratified_split, subsample_per_class, synthesize, Dataset,
    DatasetManifest, DatasetSpec, ManifestEntry, Split, DATASET_MANIFEST, FULL_SCALE_SIGNALS_PER_EMITTER, SIGNAL_DIR,
};
pub use experiment::{
    aux_profiles, evaluate_pipeline, icvmd_sample, prepare_inputs, pretrain_branch, run_eval_job, run_experiment,
    run_fewshot, run_fewshot_on, run_train_job, write_reports, AuxSpec, ExperimentSpec, Inputs, NetworkSpec, Pipeline,
    TrainJob, DATASET_DIR, REPORT_CSV, REPORT_JSON,
};
pub use features::{
    cumulants, extract_features, feature_names, half_power_width, pack_modes, raw_feature_names, raw_features,
    retained_modes, Cumulants, FeatureConfig, ModeStat,
};
pub use report::{csv_rows, evaluate, ExperimentReport, Prediction, ReportRow, SnrAccuracy, CSV_HEADER};
