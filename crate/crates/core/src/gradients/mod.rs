//! In-distribution classifier, per-sample gradient extraction, the
//! reference gradient, pseudo-labels and sub-Gaussianity diagnostics.

mod diagnostics;
mod model;

pub use diagnostics::{subgaussian_diagnostics, Histogram, SubGaussianReport};
pub use model::{
    confidence_prefilter, gradient_matrix, mean_gradient, per_sample_gradient, pseudo_label,
    read_checkpoint, reference_gradient, train_ind_classifier, write_checkpoint, GradientLayout,
    IndModel, Loss, Prediction, PrefilterOutcome, ReferenceGradient, TrainConfig, TrainingMeta,
};

pub(crate) use model::softmax;

use std::path::Path;

use crate::error::{MedixError, Result};

/// Labeled in-distribution samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(MedixError::EmptySampleSet);
        }
        if classes < 2 {
            return Err(MedixError::DegenerateDataset(format!("need at least 2 classes, got {classes}")));
        }
        if labels.len() != features.len() {
            return Err(MedixError::DimensionMismatch { expected: features.len(), actual: labels.len() });
        }
        let p = features[0].len();
        if p == 0 {
            return Err(MedixError::DegenerateDataset("zero-dimensional features".into()));
        }
        for x in &features {
            if x.len() != p {
                return Err(MedixError::DimensionMismatch { expected: p, actual: x.len() });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(MedixError::NonFiniteFeature);
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(MedixError::DegenerateDataset(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(LabeledDataset { features, labels, classes })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    /// Number of distinct labels actually present.
    pub fn present_classes(&self) -> usize {
        let mut seen = vec![false; self.classes];
        self.labels.iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|&&s| s).count()
    }

    /// CSV with the `label` column first, then `x0, x1, ...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["label".to_string()];
        header.extend((0..self.dim()).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut rec = vec![y.to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| MedixError::io(path, e))
    }

    /// Reads a dataset CSV; the class count is `max label + 1` unless given.
    pub fn read_csv(path: &Path, classes: Option<usize>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        if r.headers()?.get(0).map(str::trim) != Some("label") {
            return Err(MedixError::format(path, "first column must be `label`"));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let bad = |f: &str| MedixError::format(path, format!("bad value `{f}`"));
            let y: usize = rec[0].trim().parse().map_err(|_| bad(&rec[0]))?;
            let x = rec
                .iter()
                .skip(1)
                .map(|f| f.trim().parse::<f64>().map_err(|_| bad(f)))
                .collect::<Result<Vec<_>>>()?;
            labels.push(y);
            features.push(x);
        }
        let k = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        LabeledDataset::new(features, labels, k)
    }
}
