use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MedixError, Result};
use crate::stats::GradientMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` equally spaced edges spanning [min, max].
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug)]
pub struct SubGaussianReport {
    pub histogram: Histogram,
    /// `(normal quantile, standardized empirical quantile)` per sample
    /// rank, using plotting positions (k − ½)/m.
    pub qq_pairs: Result<Vec<(f64, f64)>>,
}

/// Histogram and normal Q-Q pairs of one gradient coordinate.
pub fn subgaussian_diagnostics(g: &GradientMatrix, coord: usize, bins: usize) -> Result<SubGaussianReport> {
    if bins < 2 {
        return Err(MedixError::invalid("bins", "need at least 2 bins"));
    }
    if coord >= g.cols() {
        return Err(MedixError::DimensionMismatch { expected: g.cols(), actual: coord });
    }
    let mut col = g.column(coord);
    col.sort_unstable_by(f64::total_cmp);
    let (lo, hi) = (col[0], col[col.len() - 1]);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|b| lo + width * b as f64).collect();
    let mut counts = vec![0; bins];
    for v in &col {
        let b = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
        counts[b] += 1;
    }
    let histogram = Histogram { edges, counts };

    let m = col.len();
    let mean = col.iter().sum::<f64>() / m as f64;
    let var = if m > 1 { col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
    let qq_pairs = if var > 0.0 {
        let sd = var.sqrt();
        let normal = Normal::standard();
        Ok(col
            .iter()
            .enumerate()
            .map(|(k, v)| (normal.inverse_cdf((k as f64 + 0.5) / m as f64), (v - mean) / sd))
            .collect())
    } else {
        Err(MedixError::DegenerateColumn(coord))
    };
    Ok(SubGaussianReport { histogram, qq_pairs })
}
