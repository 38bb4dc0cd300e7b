use super::{GradientMatrix, MedianVector};
use crate::error::{MedixError, Result};

/// Midpoint used for even-count medians. Every median path goes through
/// this one function so fast and naive results agree bit for bit.
#[inline]
pub fn mid(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}

#[inline]
fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let (a, b) = ((n - 1) / 2, n / 2);
    if a == b {
        sorted[a]
    } else {
        mid(sorted[a], sorted[b])
    }
}

/// Coordinate-wise median; even counts use the mean of the two middle
/// order statistics.
pub fn element_wise_median(g: &GradientMatrix) -> MedianVector {
    let ids: Vec<usize> = (0..g.rows()).collect();
    element_wise_median_of_rows(g, &ids).expect("GradientMatrix is never empty")
}

/// Coordinate-wise median over a subset of rows, by sorting each column.
pub fn element_wise_median_of_rows(g: &GradientMatrix, ids: &[usize]) -> Result<MedianVector> {
    if ids.is_empty() {
        return Err(MedixError::EmptySampleSet);
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= g.rows()) {
        return Err(MedixError::DeadRow(bad));
    }
    let mut col = vec![0.0; ids.len()];
    let values = (0..g.cols())
        .map(|j| {
            for (c, &i) in col.iter_mut().zip(ids) {
                *c = g.get(i, j);
            }
            col.sort_unstable_by(f64::total_cmp);
            median_sorted(&col)
        })
        .collect();
    Ok(MedianVector(values))
}

/// Per-column sorted order of the live rows plus the inverse rank lookup.
///
/// Supports O(d) leave-one-out medians and O(m·d) batch removal.
#[derive(Debug, Clone)]
pub struct ColumnOrderIndex {
    rows: usize,
    cols: usize,
    // order[j] = live row ids sorted by (value, row id)
    order: Vec<Vec<usize>>,
    // rank[j * rows + i] = position of row i in order[j]; stale for dead rows
    rank: Vec<usize>,
    live: Vec<bool>,
    n_live: usize,
}

pub fn build_column_index(g: &GradientMatrix) -> ColumnOrderIndex {
    ColumnOrderIndex::build(g)
}

impl ColumnOrderIndex {
    pub fn build(g: &GradientMatrix) -> Self {
        let (rows, cols) = (g.rows(), g.cols());
        let mut order = Vec::with_capacity(cols);
        let mut rank = vec![0; rows * cols];
        for j in 0..cols {
            let mut perm: Vec<usize> = (0..rows).collect();
            // stable sort keeps equal values in ascending row order
            perm.sort_by(|&a, &b| g.get(a, j).total_cmp(&g.get(b, j)));
            for (pos, &i) in perm.iter().enumerate() {
                rank[j * rows + i] = pos;
            }
            order.push(perm);
        }
        ColumnOrderIndex { rows, cols, order, rank, live: vec![true; rows], n_live: rows }
    }

    pub fn live_count(&self) -> usize {
        self.n_live
    }

    pub fn is_live(&self, row: usize) -> bool {
        row < self.rows && self.live[row]
    }

    /// Live row ids in ascending order.
    pub fn live_rows(&self) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.live[i]).collect()
    }

    /// Sorted live row ids of column `j`.
    pub fn permutation(&self, j: usize) -> &[usize] {
        &self.order[j]
    }

    /// Position of a live row within column `j`'s sorted order.
    pub fn rank(&self, j: usize, row: usize) -> Option<usize> {
        self.is_live(row).then(|| self.rank[j * self.rows + row])
    }

    fn check_shape(&self, g: &GradientMatrix) -> Result<()> {
        if g.rows() != self.rows {
            return Err(MedixError::DimensionMismatch { expected: self.rows, actual: g.rows() });
        }
        if g.cols() != self.cols {
            return Err(MedixError::DimensionMismatch { expected: self.cols, actual: g.cols() });
        }
        Ok(())
    }

    /// Median of the live rows.
    pub fn median(&self, g: &GradientMatrix) -> Result<MedianVector> {
        self.check_shape(g)?;
        if self.n_live == 0 {
            return Err(MedixError::EmptySampleSet);
        }
        let n = self.n_live;
        let (a, b) = ((n - 1) / 2, n / 2);
        let values = self
            .order
            .iter()
            .enumerate()
            .map(|(j, ord)| {
                let va = g.get(ord[a], j);
                if a == b {
                    va
                } else {
                    mid(va, g.get(ord[b], j))
                }
            })
            .collect();
        Ok(MedianVector(values))
    }

    /// Median of the live rows with `row` left out, written into `out`.
    ///
    /// With `row` at rank r, order statistic p of the reduced column is
    /// entry p of the full column if p < r and entry p + 1 otherwise.
    pub fn loo_median_into(&self, g: &GradientMatrix, row: usize, out: &mut [f64]) -> Result<()> {
        self.check_shape(g)?;
        if !self.is_live(row) {
            return Err(MedixError::DeadRow(row));
        }
        if self.n_live < 2 {
            return Err(MedixError::EmptySampleSet);
        }
        if out.len() != self.cols {
            return Err(MedixError::DimensionMismatch { expected: self.cols, actual: out.len() });
        }
        let n = self.n_live - 1;
        let (a, b) = ((n - 1) / 2, n / 2);
        for (j, (ord, o)) in self.order.iter().zip(out.iter_mut()).enumerate() {
            let r = self.rank[j * self.rows + row];
            let ia = if a < r { a } else { a + 1 };
            let va = g.get(ord[ia], j);
            *o = if a == b {
                va
            } else {
                let ib = if b < r { b } else { b + 1 };
                mid(va, g.get(ord[ib], j))
            };
        }
        Ok(())
    }

    pub fn loo_median(&self, g: &GradientMatrix, row: usize) -> Result<MedianVector> {
        let mut out = vec![0.0; self.cols];
        self.loo_median_into(g, row, &mut out)?;
        Ok(MedianVector(out))
    }

    /// Marks rows dead and compacts every column's order (O(m·d)).
    pub fn remove_rows(&mut self, ids: &[usize]) -> Result<()> {
        for &i in ids {
            if !self.is_live(i) {
                return Err(MedixError::DeadRow(i));
            }
            self.live[i] = false;
            self.n_live -= 1;
        }
        let live = &self.live;
        for (j, ord) in self.order.iter_mut().enumerate() {
            ord.retain(|&i| live[i]);
            for (pos, &i) in ord.iter().enumerate() {
                self.rank[j * self.rows + i] = pos;
            }
        }
        Ok(())
    }

    /// Re-inserts previously removed rows (used when a stop rule rolls back
    /// the last batch).
    pub fn restore_rows(&mut self, g: &GradientMatrix, ids: &[usize]) -> Result<()> {
        self.check_shape(g)?;
        for &i in ids {
            if i >= self.rows || self.live[i] {
                return Err(MedixError::invalid("restore", format!("row {i} is not removed")));
            }
            self.live[i] = true;
            self.n_live += 1;
        }
        for j in 0..self.cols {
            let ord = &mut self.order[j];
            ord.extend_from_slice(ids);
            ord.sort_by(|&a, &b| g.get(a, j).total_cmp(&g.get(b, j)).then(a.cmp(&b)));
            for (pos, &i) in ord.iter().enumerate() {
                self.rank[j * self.rows + i] = pos;
            }
        }
        Ok(())
    }
}

/// Leave-one-out median via the order index (O(d)).
pub fn loo_median(index: &ColumnOrderIndex, g: &GradientMatrix, row: usize) -> Result<MedianVector> {
    index.loo_median(g, row)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gm(rows: &[&[f64]]) -> GradientMatrix {
        GradientMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn median_examples() {
        let g = gm(&[&[1.0, 5.0], &[2.0, 4.0], &[3.0, 3.0]]);
        assert_eq!(element_wise_median(&g).0, vec![2.0, 4.0]);
        assert_eq!(element_wise_median(&gm(&[&[1.0, 0.0], &[3.0, 0.0]])).0, vec![2.0, 0.0]);
        assert_eq!(element_wise_median(&gm(&[&[7.0, -2.0]])).0, vec![7.0, -2.0]);
    }

    #[test]
    fn index_examples() {
        let idx = build_column_index(&gm(&[&[3.0], &[1.0], &[2.0]]));
        assert_eq!(idx.permutation(0), &[1, 2, 0]);
        assert_eq!(idx.rank(0, 0), Some(2));
        let idx = build_column_index(&gm(&[&[1.0], &[2.0], &[3.0]]));
        assert_eq!(idx.permutation(0), &[0, 1, 2]);
        let idx = build_column_index(&gm(&[&[2.0], &[2.0], &[1.0]]));
        assert_eq!(idx.permutation(0), &[2, 0, 1]);
    }

    #[test]
    fn loo_examples() {
        let g = gm(&[&[1.0], &[2.0], &[3.0]]);
        let idx = build_column_index(&g);
        assert_eq!(loo_median(&idx, &g, 2).unwrap().0, vec![1.5]);
        assert_eq!(loo_median(&idx, &g, 1).unwrap().0, vec![2.0]);
        assert!(matches!(loo_median(&idx, &g, 3), Err(MedixError::DeadRow(3))));
    }

    #[test]
    fn removal_and_restore_track_live_rows() {
        let g = gm(&[&[4.0], &[1.0], &[3.0], &[2.0], &[5.0]]);
        let mut idx = build_column_index(&g);
        idx.remove_rows(&[4, 1]).unwrap();
        assert_eq!(idx.permutation(0), &[3, 2, 0]);
        assert_eq!(idx.median(&g).unwrap().0, vec![3.0]);
        assert_eq!(idx.loo_median(&g, 2).unwrap().0, vec![3.0]);
        assert!(idx.loo_median(&g, 4).is_err());
        idx.restore_rows(&g, &[4, 1]).unwrap();
        assert_eq!(idx.permutation(0), &[1, 3, 2, 0, 4]);
        assert_eq!(idx.rank(0, 4), Some(4));
    }

    #[test]
    fn loo_of_last_live_row_is_empty() {
        let g = gm(&[&[1.0]]);
        let idx = build_column_index(&g);
        assert!(matches!(idx.loo_median(&g, 0), Err(MedixError::EmptySampleSet)));
    }
}
