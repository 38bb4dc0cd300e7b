//! Robust vector statistics over per-sample gradient matrices.

mod geometric;
pub mod io;
mod median;

pub use geometric::{geometric_median, geometric_median_of_rows, sum_of_distances, GeometricMedian};
pub use median::{
    build_column_index, element_wise_median, element_wise_median_of_rows, loo_median, mid,
    ColumnOrderIndex,
};

use serde::{Deserialize, Serialize};

use crate::error::{MedixError, Result};

/// Dense row-major matrix of `rows` per-sample gradients of length `cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GradientMatrix {
    /// Builds a matrix from row-major values, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(MedixError::EmptySampleSet);
        }
        if data.len() != rows * cols {
            return Err(MedixError::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MedixError::NonFiniteGradient { row: pos / cols, col: pos % cols });
        }
        Ok(GradientMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(MedixError::EmptySampleSet)?;
        let cols = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(MedixError::DimensionMismatch { expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        GradientMatrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, ids: &[usize]) -> Result<Self> {
        if ids.is_empty() {
            return Err(MedixError::EmptySampleSet);
        }
        let mut data = Vec::with_capacity(ids.len() * self.cols);
        for &i in ids {
            if i >= self.rows {
                return Err(MedixError::DeadRow(i));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(GradientMatrix { rows: ids.len(), cols: self.cols, data })
    }

    /// Vertical concatenation.
    pub fn stack(&self, other: &GradientMatrix) -> Result<Self> {
        if other.cols != self.cols {
            return Err(MedixError::DimensionMismatch { expected: self.cols, actual: other.cols });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(GradientMatrix { rows: self.rows + other.rows, cols: self.cols, data })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        GradientMatrix::new(self.rows, self.cols, self.data.iter().map(|v| v * c).collect())
    }

    /// Per-coordinate arithmetic mean.
    pub fn column_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.rows as f64).collect()
    }

    /// Per-coordinate sample standard deviation (n − 1 denominator; 0 for a
    /// single row).
    pub fn column_std(&self) -> Vec<f64> {
        let means = self.column_means();
        if self.rows < 2 {
            return vec![0.0; self.cols];
        }
        let mut acc = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for ((a, v), m) in acc.iter_mut().zip(r).zip(&means) {
                *a += (v - m) * (v - m);
            }
        }
        acc.iter().map(|a| (a / (self.rows - 1) as f64).sqrt()).collect()
    }
}

/// Element-wise median (or any other per-coordinate aggregate) of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianVector(pub Vec<f64>);

impl MedianVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for MedianVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distance between two equal-length vectors.
pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MedixError::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    Ok(l2_unchecked(a, b))
}

#[inline]
pub(crate) fn l2_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_examples() {
        assert_eq!(l2_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l2_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(l2_distance(&[1.0], &[-1.0]).unwrap(), 2.0);
        assert!(matches!(
            l2_distance(&[1.0], &[1.0, 2.0]),
            Err(MedixError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(GradientMatrix::new(0, 3, vec![]), Err(MedixError::EmptySampleSet)));
        assert!(matches!(
            GradientMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(MedixError::NonFiniteGradient { row: 0, col: 1 })
        ));
        assert!(GradientMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn select_and_stack() {
        let g = GradientMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let s = g.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.as_slice(), &[5.0, 6.0, 1.0, 2.0]);
        assert_eq!(g.stack(&s).unwrap().rows(), 5);
        assert_eq!(g.column(1), vec![2.0, 4.0, 6.0]);
    }
}
