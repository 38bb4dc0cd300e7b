use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{MedixError, Result};
use crate::gradients::{IndModel, LabeledDataset};

fn check_scores(name: &'static str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(MedixError::invalid(name, "empty score list"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(MedixError::invalid(name, "non-finite score"));
    }
    Ok(())
}

/// FPR of OOD scores at the threshold where InD TPR first reaches
/// `tpr_target`.
///
/// The threshold is the largest t with |{s_in ≥ t}| ≥ ⌈tpr_target·n_in⌉;
/// scores equal to t count as InD, so FPR = |{s_out ≥ t}| / n_out.
pub fn fpr_at_tpr(scores_in: &[f64], scores_out: &[f64], tpr_target: f64) -> Result<f64> {
    check_scores("scores_in", scores_in)?;
    check_scores("scores_out", scores_out)?;
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(MedixError::invalid("tpr_target", "must lie in (0, 1]"));
    }
    let mut sorted = scores_in.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    let need = ((tpr_target * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let threshold = sorted[need - 1];
    Ok(scores_out.iter().filter(|&&s| s >= threshold).count() as f64 / scores_out.len() as f64)
}

/// Mann–Whitney AUROC: P(s_in > s_out) + ½·P(s_in = s_out), from mid-ranks.
pub fn auroc(scores_in: &[f64], scores_out: &[f64]) -> Result<f64> {
    check_scores("scores_in", scores_in)?;
    check_scores("scores_out", scores_out)?;
    let (n_in, n_out) = (scores_in.len(), scores_out.len());
    let mut all: Vec<(f64, bool)> =
        scores_in.iter().map(|&s| (s, true)).chain(scores_out.iter().map(|&s| (s, false))).collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    // ranks are 1-based; ties share the mean rank, a multiple of ½
    let mut rank_sum_in = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let mid_rank = (i + 1 + j + 1) as f64 / 2.0;
        rank_sum_in += mid_rank * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_in - (n_in * (n_in + 1)) as f64 / 2.0;
    Ok(u / (n_in as f64 * n_out as f64))
}

/// Fraction of test samples whose argmax prediction equals the label.
pub fn ind_accuracy(model: &IndModel, test: &LabeledDataset) -> f64 {
    let hits = test.features().iter().zip(test.labels()).filter(|(x, &y)| model.predict(x) == y).count();
    hits as f64 / test.len() as f64
}

/// Evaluation summary; `None` marks a metric that was not measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionMetrics {
    pub fpr95: f64,
    pub auroc: f64,
    pub tpr: f64,
    pub ind_acc: Option<f64>,
    pub err_in: Option<f64>,
    pub err_out: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl DetectionMetrics {
    pub const CSV_HEADER: &'static str = "fpr95,auroc,ind_acc,err_in,err_out";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.fpr95, self.auroc, opt(self.ind_acc), opt(self.err_in), opt(self.err_out))
    }

    /// Writes header plus one row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())).map_err(|e| MedixError::io(path, e))
    }
}

impl fmt::Display for DetectionMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.2}%", 100.0 * x));
        writeln!(f, "{:<10} {:>10}", "metric", "value")?;
        writeln!(f, "{:<10} {:>10}", "FPR95", pct(Some(self.fpr95)))?;
        writeln!(f, "{:<10} {:>10}", "AUROC", pct(Some(self.auroc)))?;
        writeln!(f, "{:<10} {:>10}", "TPR", pct(Some(self.tpr)))?;
        writeln!(f, "{:<10} {:>10}", "ID-Acc", pct(self.ind_acc))?;
        writeln!(f, "{:<10} {:>10}", "ERR_in", pct(self.err_in))?;
        write!(f, "{:<10} {:>10}", "ERR_out", pct(self.err_out))
    }
}
