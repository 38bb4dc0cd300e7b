use super::{l2_unchecked, GradientMatrix, MedianVector};
use crate::error::{MedixError, Result};

const ANCHOR_RADIUS: f64 = 1e-12;
const ANCHOR_NUDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMedian {
    pub point: MedianVector,
    pub iterations: usize,
    pub converged: bool,
}

/// Weiszfeld iteration for argmin_x Σ‖x − g_i‖₂, started at the coordinate
/// mean. Stops when the step norm drops below `tol`; hitting `max_iter`
/// yields `converged = false` rather than an error.
///
/// An iterate that lands on a data point (within 1e-12) is accepted if that
/// point satisfies the optimality condition, and otherwise moved off it by
/// 1e-9 × ‖column ranges‖ along the descent direction, so the objective never
/// increases.
pub fn geometric_median(g: &GradientMatrix, tol: f64, max_iter: usize) -> Result<GeometricMedian> {
    let ids: Vec<usize> = (0..g.rows()).collect();
    geometric_median_of_rows(g, &ids, None, tol, max_iter)
}

/// Weiszfeld over a subset of rows, optionally warm-started.
pub fn geometric_median_of_rows(
    g: &GradientMatrix,
    ids: &[usize],
    init: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<GeometricMedian> {
    if ids.is_empty() {
        return Err(MedixError::EmptySampleSet);
    }
    if !(tol > 0.0) {
        return Err(MedixError::invalid("tol", "must be positive"));
    }
    let d = g.cols();
    if ids.len() == 1 {
        return Ok(GeometricMedian {
            point: MedianVector(g.row(ids[0]).to_vec()),
            iterations: 0,
            converged: true,
        });
    }
    let mut x = match init {
        Some(v) if v.len() == d => v.to_vec(),
        Some(v) => return Err(MedixError::DimensionMismatch { expected: d, actual: v.len() }),
        None => {
            let mut m = vec![0.0; d];
            for &i in ids {
                for (a, v) in m.iter_mut().zip(g.row(i)) {
                    *a += v;
                }
            }
            m.iter_mut().for_each(|a| *a /= ids.len() as f64);
            m
        }
    };

    let ranges = column_ranges(g, ids);
    let nudge_len = ANCHOR_NUDGE * ranges.iter().map(|r| r * r).sum::<f64>().sqrt();
    if nudge_len == 0.0 {
        // every point coincides
        return Ok(GeometricMedian {
            point: MedianVector(g.row(ids[0]).to_vec()),
            iterations: 0,
            converged: true,
        });
    }

    let mut num = vec![0.0; d];
    for it in 1..=max_iter {
        if let Some(&k) = ids.iter().find(|&&i| l2_unchecked(&x, g.row(i)) < ANCHOR_RADIUS) {
            // resultant pull of the other points; |pull| ≤ (copies of the
            // anchor) means the anchor itself is the minimiser
            let mut pull = vec![0.0; d];
            let mut copies = 0.0;
            for &i in ids {
                if l2_unchecked(g.row(i), g.row(k)) < ANCHOR_RADIUS {
                    copies += 1.0;
                    continue;
                }
                let row = g.row(i);
                let dist = l2_unchecked(&x, row);
                pull.iter_mut().zip(row).zip(&x).for_each(|((p, v), xj)| *p += (v - xj) / dist);
            }
            let strength = pull.iter().map(|p| p * p).sum::<f64>().sqrt();
            if strength <= copies {
                return Ok(GeometricMedian { point: MedianVector(g.row(k).to_vec()), iterations: it, converged: true });
            }
            // step off along the descent direction
            x.iter_mut().zip(&pull).for_each(|(xj, p)| *xj += nudge_len * p / strength);
        }
        num.iter_mut().for_each(|v| *v = 0.0);
        let mut den = 0.0;
        for &i in ids {
            let row = g.row(i);
            let w = 1.0 / l2_unchecked(&x, row).max(ANCHOR_RADIUS);
            den += w;
            for (n, v) in num.iter_mut().zip(row) {
                *n += w * v;
            }
        }
        let mut step_sq = 0.0;
        for (xj, n) in x.iter_mut().zip(&num) {
            let next = n / den;
            step_sq += (next - *xj) * (next - *xj);
            *xj = next;
        }
        if step_sq.sqrt() < tol {
            return Ok(GeometricMedian { point: MedianVector(x), iterations: it, converged: true });
        }
    }
    Ok(GeometricMedian { point: MedianVector(x), iterations: max_iter, converged: false })
}

fn column_ranges(g: &GradientMatrix, ids: &[usize]) -> Vec<f64> {
    (0..g.cols())
        .map(|j| {
            let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = g.get(i, j);
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .collect()
}

/// Σ‖x − g_i‖₂ over the given rows.
pub fn sum_of_distances(g: &GradientMatrix, ids: &[usize], x: &[f64]) -> f64 {
    ids.iter().map(|&i| l2_unchecked(x, g.row(i))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_its_own_median() {
        let g = GradientMatrix::from_rows(&[[3.0, -1.0]]).unwrap();
        let gm = geometric_median(&g, 1e-10, 100).unwrap();
        assert_eq!(gm.point.0, vec![3.0, -1.0]);
        assert!(gm.converged);
    }

    #[test]
    fn square_corners_center() {
        let g = GradientMatrix::from_rows(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
            .unwrap();
        let gm = geometric_median(&g, 1e-10, 1000).unwrap();
        assert!(gm.point.0.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn start_on_a_data_point_escapes() {
        // the mean (0, 0) coincides with the middle point, which is also the GM
        let g = GradientMatrix::from_rows(&[[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        let gm = geometric_median(&g, 1e-12, 10_000).unwrap();
        assert!(gm.point.0.iter().all(|v| v.abs() < 1e-6), "{:?}", gm.point);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let g = GradientMatrix::from_rows(&[[0.0, 0.0], [10.0, 0.0], [0.0, 7.0], [3.0, 3.0]])
            .unwrap();
        let gm = geometric_median(&g, 1e-300, 2).unwrap();
        assert!(!gm.converged);
        assert_eq!(gm.iterations, 2);
    }

    #[test]
    fn rejects_bad_tol() {
        let g = GradientMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(geometric_median(&g, 0.0, 10).is_err());
    }
}
