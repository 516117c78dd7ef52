use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sei_core::harness::{
    csv_rows, generate_dataset, run_eval_job, run_fewshot, run_fewshot_on, run_train_job, write_reports, Dataset,
    DatasetSpec, ExperimentSpec, Pipeline, TrainJob, FULL_SCALE_SIGNALS_PER_EMITTER,
};
use sei_core::icvmd::{
    icvmd_decompose, parse_selection, probe_parameters, reconstruct_from_dump, write_mode_dump, IcvmdConfig,
};
use sei_core::nn::checkpoint;
use sei_core::{iq, Error, Result, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "sei",
    version,
    about = "Emitter fingerprint simulation, ICVMD and few-shot experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset.
    Gen {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Use the full-size signal count per emitter.
        #[arg(long)]
        full_scale: bool,
    },
    /// Decompose one iqf32 file and dump its modes.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild a signal from a mode dump.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated: signal, feature, dc, special, residual, or all.
        #[arg(long, default_value = "signal,dc")]
        select: String,
        /// Defaults to `<in>/reconstruction.iqf32`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Suggest K and alpha for one iqf32 file.
    Probe {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Train a network on the training split of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Score a checkpoint on the test split it was trained against.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Few-shot sweep over training proportions.
    Fewshot {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "icvmd-features")]
        pipeline: String,
        #[arg(long, value_delimiter = ',')]
        proportions: Option<Vec<f64>>,
        /// Use an existing dataset directory instead of simulating one.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Write report.csv and report.json here; otherwise print the CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize, Deserialize)]
struct DecomposeConfig {
    schema_version: u32,
    #[serde(default)]
    icvmd: IcvmdConfig,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let v: serde_json::Value = serde_json::from_slice(&fs::read(path)?)?;
    match v.get("schema_version").and_then(|s| s.as_u64()) {
        Some(s) if s == SCHEMA_VERSION as u64 => {}
        Some(s) => {
            return Err(Error::Parameter(format!(
                "{}: schema_version {s} is not {SCHEMA_VERSION}",
                path.display()
            )))
        }
        None => return Err(Error::Format(format!("{}: missing schema_version", path.display()))),
    }
    Ok(serde_json::from_value(v)?)
}

fn job_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".job.json");
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { spec, out, full_scale } => {
            let mut spec: DatasetSpec = match spec {
                Some(p) => read_json(&p)?,
                None => DatasetSpec::default(),
            };
            if full_scale {
                spec.signals_per_emitter = FULL_SCALE_SIGNALS_PER_EMITTER;
            }
            let m = generate_dataset(&spec, &out)?;
            println!("wrote {} signals to {}", m.entries.len(), out.display());
        }
        Command::Decompose { input, config, out } => {
            let cfg = match config {
                Some(p) => read_json::<DecomposeConfig>(&p)?.icvmd,
                None => IcvmdConfig::default(),
            };
            let (x, _) = iq::read_signal(&input)?;
            let r = icvmd_decompose(&x, &cfg)?;
            let m = write_mode_dump(&out, &r)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Reconstruct { input, select, out } => {
            let selection = parse_selection(&select)?;
            let y = reconstruct_from_dump(&input, &selection)?;
            let out = out.unwrap_or_else(|| input.join("reconstruction.iqf32"));
            iq::write_signal(&out, &y, None)?;
            println!("wrote {} samples to {}", y.len(), out.display());
        }
        Command::Probe { input } => {
            let (x, _) = iq::read_signal(&input)?;
            println!("{}", serde_json::to_string_pretty(&probe_parameters(&x)?)?);
        }
        Command::Train { data, config, ckpt } => {
            let job: TrainJob = match config {
                Some(p) => read_json(&p)?,
                None => TrainJob::default(),
            };
            job.validate()?;
            let dataset = Dataset::load(&data)?;
            let (params, history) = run_train_job(&job, &dataset)?;
            checkpoint::save(&ckpt, &params)?;
            fs::write(job_path(&ckpt), serde_json::to_vec_pretty(&job)?)?;
            for (epoch, loss) in history.iter().enumerate() {
                println!("epoch {epoch} loss {loss:.6}");
            }
        }
        Command::Eval { ckpt, data, out } => {
            let job: TrainJob = read_json(&job_path(&ckpt))?;
            let params = checkpoint::load(&ckpt)?;
            let dataset = Dataset::load(&data)?;
            let report = run_eval_job(&job, &dataset, &params)?;
            println!("accuracy {:.6} on {} signals", report.accuracy, report.n);
            for s in &report.per_snr {
                println!("snr {} accuracy {:.6} n {}", s.snr_db, s.accuracy, s.n);
            }
            if let Some(out) = out {
                fs::write(out, serde_json::to_vec_pretty(&report)?)?;
            }
        }
        Command::Fewshot {
            spec,
            pipeline,
            proportions,
            data,
            out,
        } => {
            let mut spec: ExperimentSpec = match spec {
                Some(p) => read_json(&p)?,
                None => ExperimentSpec::default(),
            };
            if let Some(p) = proportions {
                spec.proportions = p;
            }
            let pipeline: Pipeline = pipeline.parse()?;
            let rows = match data {
                Some(dir) => {
                    let dataset = Dataset::load(&dir)?;
                    spec.dataset = dataset.manifest.spec.clone();
                    run_fewshot_on(&spec, &dataset, pipeline)?
                }
                None => run_fewshot(&spec, pipeline)?,
            };
            match out {
                Some(dir) => {
                    write_reports(&dir, &rows)?;
                    println!("wrote {} rows to {}", rows.len(), dir.display());
                }
                None => print!("{}", csv_rows(&rows)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
