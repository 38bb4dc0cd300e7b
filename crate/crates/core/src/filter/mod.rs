//! Iterative leave-one-out median filtering of wild gradient sets.

mod algorithm;
mod sweep;

pub use algorithm::{
    medix_filter, medix_filter_gradients, Aggregator, FilterConfig, FilterResult, IterationRecord,
    StopReason, StopRule,
};
pub use sweep::{deviation_sweep, deviation_sweep_with, SweepPoint};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MedixError, Result};
use crate::gradients::{gradient_matrix, pseudo_label, GradientLayout, IndModel};
use crate::stats::GradientMatrix;

/// Hidden ground-truth source of a wild sample. Evaluation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Ind,
    Ood,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Ind => "ind",
            Origin::Ood => "ood",
        })
    }
}

impl FromStr for Origin {
    type Err = MedixError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ind" => Ok(Origin::Ind),
            "ood" => Ok(Origin::Ood),
            other => Err(MedixError::invalid("__origin", format!("expected `ind` or `ood`, got `{other}`"))),
        }
    }
}

/// Unlabeled wild samples with their gradients under pseudo-labels.
#[derive(Debug, Clone)]
pub struct WildSet {
    features: Vec<Vec<f64>>,
    origin: Vec<Origin>,
    pseudo_labels: Vec<usize>,
    gradients: GradientMatrix,
}

impl WildSet {
    pub fn new(
        features: Vec<Vec<f64>>,
        origin: Vec<Origin>,
        pseudo_labels: Vec<usize>,
        gradients: GradientMatrix,
    ) -> Result<Self> {
        let m = gradients.rows();
        for len in [features.len(), origin.len(), pseudo_labels.len()] {
            if len != m {
                return Err(MedixError::DimensionMismatch { expected: m, actual: len });
            }
        }
        Ok(WildSet { features, origin, pseudo_labels, gradients })
    }

    /// Pseudo-labels every sample with `model` and extracts the gradient of
    /// the loss at that pseudo-label.
    pub fn from_model(
        features: Vec<Vec<f64>>,
        origin: Vec<Origin>,
        model: &IndModel,
        layout: GradientLayout,
    ) -> Result<Self> {
        let pseudo_labels: Vec<usize> = features.iter().map(|x| pseudo_label(model, x).label).collect();
        let gradients = gradient_matrix(model, &features, &pseudo_labels, layout)?;
        WildSet::new(features, origin, pseudo_labels, gradients)
    }

    /// A wild set that exists only as gradients (simulated gradient worlds).
    pub fn from_gradients(gradients: GradientMatrix, origin: Vec<Origin>) -> Result<Self> {
        let m = gradients.rows();
        WildSet::new(vec![Vec::new(); m], origin, vec![0; m], gradients)
    }

    pub fn len(&self) -> usize {
        self.gradients.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn origin(&self) -> &[Origin] {
        &self.origin
    }

    pub fn pseudo_labels(&self) -> &[usize] {
        &self.pseudo_labels
    }

    pub fn gradients(&self) -> &GradientMatrix {
        &self.gradients
    }

    pub fn count(&self, which: Origin) -> usize {
        self.origin.iter().filter(|&&o| o == which).count()
    }

    pub fn subset(&self, ids: &[usize]) -> Result<WildSet> {
        Ok(WildSet {
            features: ids.iter().map(|&i| self.features[i].clone()).collect(),
            origin: ids.iter().map(|&i| self.origin[i]).collect(),
            pseudo_labels: ids.iter().map(|&i| self.pseudo_labels[i]).collect(),
            gradients: self.gradients.select_rows(ids)?,
        })
    }
}

/// Misclassification rates of a filter run; `None` when the denominator
/// population is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRates {
    /// Fraction of true InD samples flagged as outliers.
    pub err_in: Option<f64>,
    /// Fraction of true OOD samples left among the survivors.
    pub err_out: Option<f64>,
}

impl ErrorRates {
    /// Fraction of true OOD flagged (1 − err_out).
    pub fn ood_recall(&self) -> Option<f64> {
        self.err_out.map(|e| 1.0 - e)
    }
}

pub fn err_rates(result: &FilterResult, wild: &WildSet) -> ErrorRates {
    err_rates_from_origin(result, wild.origin())
}

pub fn err_rates_from_origin(result: &FilterResult, origin: &[Origin]) -> ErrorRates {
    let m_in = origin.iter().filter(|&&o| o == Origin::Ind).count();
    let m_out = origin.len() - m_in;
    let flagged_in = result.outlier_ids.iter().filter(|&&i| origin[i] == Origin::Ind).count();
    let kept_out = result.survivor_ids.iter().filter(|&&i| origin[i] == Origin::Ood).count();
    ErrorRates {
        err_in: (m_in > 0).then(|| flagged_in as f64 / m_in as f64),
        err_out: (m_out > 0).then(|| kept_out as f64 / m_out as f64),
    }
}

/// Fraction of the flagged set that is truly InD (the "impurity" of Ŝ_out).
pub fn flagged_ind_fraction(result: &FilterResult, origin: &[Origin]) -> Option<f64> {
    let n = result.outlier_ids.len();
    (n > 0).then(|| result.outlier_ids.iter().filter(|&&i| origin[i] == Origin::Ind).count() as f64 / n as f64)
}
