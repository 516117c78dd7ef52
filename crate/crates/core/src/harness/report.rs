use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One scored test signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub predicted: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrAccuracy {
    pub snr_db: f64,
    pub accuracy: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub pipeline: String,
    pub proportion: f64,
    pub accuracy: f64,
    pub n: usize,
    /// Ascending SNR.
    pub per_snr: Vec<SnrAccuracy>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub wall_clock_s: f64,
}

impl ExperimentReport {
    pub fn accuracy_at(&self, snr_db: f64) -> Option<f64> {
        self.per_snr.iter().find(|s| s.snr_db == snr_db).map(|s| s.accuracy)
    }

    /// Hits over support for each true class; `None` for classes absent from the test set.
    pub fn recalls(&self) -> Vec<Option<f64>> {
        self.confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let support: usize = row.iter().sum();
                (support > 0).then(|| row.get(c).copied().unwrap_or(0) as f64 / support as f64)
            })
            .collect()
    }
}

/// Order-independent scoring. Labels or predictions beyond `n_classes`
/// widen the confusion matrix and count as misses.
pub fn evaluate(
    pipeline: &str,
    proportion: f64,
    predictions: &[Prediction],
    n_classes: usize,
) -> Result<ExperimentReport> {
    if predictions.is_empty() {
        return Err(Error::param("cannot evaluate an empty test set"));
    }
    let width = predictions
        .iter()
        .map(|p| p.label.max(p.predicted) + 1)
        .max()
        .unwrap_or(0)
        .max(n_classes);
    let mut confusion = vec![vec![0usize; width]; width];
    let mut by_snr: BTreeMap<u64, (f64, usize, usize)> = BTreeMap::new();
    let mut hits = 0;
    for p in predictions {
        confusion[p.label][p.predicted] += 1;
        let ok = usize::from(p.label == p.predicted);
        hits += ok;
        let key = ordered_bits(p.snr_db);
        let cell = by_snr.entry(key).or_insert((p.snr_db, 0, 0));
        cell.1 += ok;
        cell.2 += 1;
    }
    let per_snr = by_snr
        .into_values()
        .map(|(snr_db, h, n)| SnrAccuracy {
            snr_db,
            accuracy: h as f64 / n as f64,
            n,
        })
        .collect();
    Ok(ExperimentReport {
        pipeline: pipeline.to_string(),
        proportion,
        accuracy: hits as f64 / predictions.len() as f64,
        n: predictions.len(),
        per_snr,
        confusion,
        config: serde_json::Value::Null,
        seeds: BTreeMap::new(),
        wall_clock_s: 0.0,
    })
}

/// Monotone map from finite f64 to u64 so the BTreeMap sorts by value.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

pub const CSV_HEADER: &str = "pipeline,proportion,snr_db,accuracy,n";

/// One row per (pipeline, proportion, SNR). Unsupported cells are rows with
/// an empty accuracy and `n = 0`.
pub fn csv_rows(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        match &row.report {
            Some(r) => {
                for s in &r.per_snr {
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.6},{}",
                        row.pipeline, row.proportion, s.snr_db, s.accuracy, s.n
                    );
                }
            }
            None => {
                let _ = writeln!(out, "{},{},,,0", row.pipeline, row.proportion);
            }
        }
    }
    out
}

/// One cell of a few-shot sweep; `report` is `None` when the subsample left
/// some class without training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pipeline: String,
    pub proportion: f64,
    pub report: Option<ExperimentReport>,
}
