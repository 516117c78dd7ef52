use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nearest class mean after per-dimension standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    pub mean: Vec<f64>,
    /// Per-dimension standard deviation; zero spreads are stored as 1.
    pub scale: Vec<f64>,
    /// Standardized class means, indexed by class.
    pub centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    /// Every class in `0..n_classes` needs at least one sample.
    pub fn fit(features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::param(format!(
                "need matching nonempty features and labels, got {} and {}",
                features.len(),
                labels.len()
            )));
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::param("feature vectors are empty"));
        }
        for (i, f) in features.iter().enumerate() {
            if f.len() != dim {
                return Err(Error::param(format!(
                    "sample {i} has {} features, expected {dim}",
                    f.len()
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("sample {i} has non-finite features")));
            }
        }
        if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::param(format!("label {l} outside {n_classes} classes")));
        }
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut scale = vec![0.0; dim];
        for f in features {
            for ((s, v), m) in scale.iter_mut().zip(f).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { (*s / n).sqrt() } else { 1.0 };
        }
        let mut sums = vec![vec![0.0; dim]; n_classes];
        let mut counts = vec![0usize; n_classes];
        for (f, &l) in features.iter().zip(labels) {
            counts[l] += 1;
            for (d, v) in f.iter().enumerate() {
                sums[l][d] += (v - mean[d]) / scale[d];
            }
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(Error::param(format!("class {c} has no training samples")));
        }
        let centroids = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
            .collect();
        Ok(Self { mean, scale, centroids })
    }

    pub fn n_classes(&self) -> usize {
        self.centroids.len()
    }

    /// Nearest centroid by Euclidean distance; ties go to the lower class.
    pub fn classify(&self, feature: &[f64]) -> Result<usize> {
        if feature.len() != self.mean.len() {
            return Err(Error::param(format!(
                "feature has {} entries, classifier expects {}",
                feature.len(),
                self.mean.len()
            )));
        }
        let z: Vec<f64> = feature
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let mut best = (0, f64::INFINITY);
        for (c, centroid) in self.centroids.iter().enumerate() {
            let d: f64 = z.iter().zip(centroid).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (c, d);
            }
        }
        Ok(best.0)
    }
}
