use serde::Serialize;

use super::Aggregator;
use crate::error::{MedixError, Result};
use crate::stats::{element_wise_median_of_rows, geometric_median_of_rows, l2_unchecked, GradientMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n_ood: usize,
    pub deviation: f64,
}

/// ‖ref − EWM(ind ∪ first n OOD rows)‖₂ for every n in `steps`.
pub fn deviation_sweep(
    ind_pool: &GradientMatrix,
    ood_pool: &GradientMatrix,
    reference: &[f64],
    steps: &[usize],
) -> Result<Vec<SweepPoint>> {
    deviation_sweep_with(ind_pool, ood_pool, reference, steps, Aggregator::Ewm)
}

/// Same sweep with a chosen aggregator (EWM or geometric median).
pub fn deviation_sweep_with(
    ind_pool: &GradientMatrix,
    ood_pool: &GradientMatrix,
    reference: &[f64],
    steps: &[usize],
    aggregator: Aggregator,
) -> Result<Vec<SweepPoint>> {
    if ood_pool.cols() != ind_pool.cols() {
        return Err(MedixError::DimensionMismatch { expected: ind_pool.cols(), actual: ood_pool.cols() });
    }
    if reference.len() != ind_pool.cols() {
        return Err(MedixError::DimensionMismatch { expected: ind_pool.cols(), actual: reference.len() });
    }
    if steps.windows(2).any(|w| w[1] < w[0]) {
        return Err(MedixError::invalid("steps", "must be non-decreasing"));
    }
    if let Some(&big) = steps.iter().find(|&&s| s > ood_pool.rows()) {
        return Err(MedixError::StepExceedsPool { step: big, pool: ood_pool.rows() });
    }
    let all = ind_pool.stack(ood_pool)?;
    steps
        .iter()
        .map(|&n| {
            let ids: Vec<usize> = (0..ind_pool.rows() + n).collect();
            let center = match aggregator {
                Aggregator::Ewm | Aggregator::EwmNaive => element_wise_median_of_rows(&all, &ids)?.0,
                Aggregator::Geometric { tol, max_iter } => {
                    geometric_median_of_rows(&all, &ids, None, tol, max_iter)?.point.0
                }
            };
            Ok(SweepPoint { n_ood: n, deviation: l2_unchecked(&center, reference) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pool_has_zero_deviation() {
        let ind = GradientMatrix::from_rows(&[[-1.0, 2.0], [1.0, -2.0], [0.0, 0.0]]).unwrap();
        let ood = GradientMatrix::from_rows(&[[5.0, 5.0]]).unwrap();
        let s = deviation_sweep(&ind, &ood, &[0.0, 0.0], &[0, 1]).unwrap();
        assert_eq!(s[0].deviation, 0.0);
        assert!(s[1].deviation > 0.0);
    }

    #[test]
    fn step_validation() {
        let ind = GradientMatrix::from_rows(&[[0.0]]).unwrap();
        let ood = GradientMatrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(
            deviation_sweep(&ind, &ood, &[0.0], &[0, 2]),
            Err(MedixError::StepExceedsPool { step: 2, pool: 1 })
        ));
        assert!(deviation_sweep(&ind, &ood, &[0.0], &[1, 0]).is_err());
    }
}
