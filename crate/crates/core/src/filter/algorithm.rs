use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WildSet;
use crate::error::{MedixError, Result};
use crate::gradients::ReferenceGradient;
use crate::stats::{
    element_wise_median_of_rows, geometric_median_of_rows, l2_unchecked, ColumnOrderIndex,
    GradientMatrix,
};

/// When the greedy loop stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop (without removing) once the largest leave-one-out drop
    /// δ_max = max_i δ_i is at most `eps_stop`.
    #[default]
    LooDrop,
    /// Stop once the distance fell by at most `eps_stop` since the previous
    /// iteration, d_{t-1} − d_t ≤ eps_stop; the batch that produced the
    /// insufficient drop is put back into the survivor set.
    IterationDrop,
}

impl FromStr for StopRule {
    type Err = MedixError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loo" | "loo_drop" => Ok(StopRule::LooDrop),
            "iteration" | "iteration_drop" => Ok(StopRule::IterationDrop),
            other => Err(MedixError::invalid("stop_rule", format!("unknown rule `{other}` (loo|iteration)"))),
        }
    }
}

/// The centre whose leave-one-out shift drives the greedy choice.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    /// Element-wise median with O(d) leave-one-out updates.
    #[default]
    Ewm,
    /// Element-wise median recomputed from scratch for every candidate;
    /// reference implementation for the fast path.
    EwmNaive,
    /// Weiszfeld geometric median, leave-one-out runs warm-started at the
    /// full-set median.
    Geometric { tol: f64, max_iter: usize },
}

impl Aggregator {
    pub fn geometric() -> Self {
        Aggregator::Geometric { tol: 1e-7, max_iter: 200 }
    }
}

impl FromStr for Aggregator {
    type Err = MedixError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ewm" => Ok(Aggregator::Ewm),
            "ewm_naive" => Ok(Aggregator::EwmNaive),
            "gm" | "geometric" => Ok(Aggregator::geometric()),
            other => Err(MedixError::invalid("aggregator", format!("unknown aggregator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub eps_stop: f64,
    pub k: usize,
    pub max_iter: usize,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(default)]
    pub aggregator: Aggregator,
}

impl FilterConfig {
    /// Harness defaults for a wild set of size `m`: eps 5e-3, k = max(1, m/20), T = 40.
    pub fn for_size(m: usize) -> Self {
        FilterConfig {
            eps_stop: 5e-3,
            k: (m / 20).max(1),
            max_iter: 40,
            stop_rule: StopRule::LooDrop,
            aggregator: Aggregator::Ewm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_stop > 0.0) || !self.eps_stop.is_finite() {
            return Err(MedixError::invalid("eps_stop", "must be a positive finite number"));
        }
        if self.k == 0 {
            return Err(MedixError::invalid("k", "must be ≥ 1"));
        }
        if self.max_iter == 0 {
            return Err(MedixError::invalid("max_iter", "must be ≥ 1"));
        }
        if let Aggregator::Geometric { tol, max_iter } = self.aggregator {
            if !(tol > 0.0) || max_iter == 0 {
                return Err(MedixError::invalid("aggregator", "geometric median needs tol > 0 and max_iter ≥ 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIter,
    Exhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::MaxIter => "max_iter",
            StopReason::Exhausted => "exhausted",
        })
    }
}

/// One pass of the loop: distance and largest drop on the survivor set at
/// the start of the iteration, and the batch removed in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub d_t: f64,
    pub delta_max: f64,
    pub removed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    /// Flagged rows, ascending.
    pub outlier_ids: Vec<usize>,
    /// Remaining rows, ascending.
    pub survivor_ids: Vec<usize>,
    /// Rows of the last batch returned to the survivors by `IterationDrop`.
    pub restored_ids: Vec<usize>,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl FilterResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// JSON with ids and stop reason (the trace goes to CSV).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| MedixError::io(path, e))
    }

    /// Trace CSV `iter,d_t,delta_max,removed_ids`, ids `;`-separated.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iter", "d_t", "delta_max", "removed_ids"])?;
        for r in &self.trace {
            let ids = r.removed.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
            w.write_record([r.iter.to_string(), r.d_t.to_string(), r.delta_max.to_string(), ids])?;
        }
        w.flush().map_err(|e| MedixError::io(path, e))
    }
}

/// Runs the filter on a wild set (origin tags are never read).
pub fn medix_filter(wild: &WildSet, reference: &ReferenceGradient, cfg: &FilterConfig) -> Result<FilterResult> {
    medix_filter_gradients(wild.gradients(), reference.values(), cfg)
}

/// Greedy leave-one-out extraction on a raw gradient matrix.
///
/// Each iteration computes d_t = ‖agg(G_S) − ref‖ and, for every live row,
/// δ_i = d_t − ‖agg(G_{S∖i}) − ref‖, then removes the k rows with the
/// largest δ_i (ties: lower row id first) as one batch.
pub fn medix_filter_gradients(g: &GradientMatrix, reference: &[f64], cfg: &FilterConfig) -> Result<FilterResult> {
    cfg.validate()?;
    if reference.len() != g.cols() {
        return Err(MedixError::DimensionMismatch { expected: g.cols(), actual: reference.len() });
    }
    if g.rows() <= cfg.k {
        return Err(MedixError::WildSetTooSmall { m: g.rows(), k: cfg.k });
    }

    let mut state = State::new(g, cfg.aggregator);
    let mut outliers: Vec<usize> = Vec::new();
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut restored = Vec::new();

    let stop_reason = loop {
        let t = trace.len();
        if t == cfg.max_iter {
            break StopReason::MaxIter;
        }
        if state.live_count() <= cfg.k {
            break StopReason::Exhausted;
        }
        let live = state.live_rows();
        let center = state.center()?;
        let d_t = l2_unchecked(&center, reference);
        let deltas = live
            .par_iter()
            .map(|&i| state.loo(i, &center).map(|c| d_t - l2_unchecked(&c, reference)))
            .collect::<Result<Vec<f64>>>()?;
        let delta_max = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let stop = match cfg.stop_rule {
            StopRule::LooDrop => delta_max <= cfg.eps_stop,
            StopRule::IterationDrop => t > 0 && trace[t - 1].d_t - d_t <= cfg.eps_stop,
        };
        if stop {
            if cfg.stop_rule == StopRule::IterationDrop {
                restored = trace[t - 1].removed.clone();
                state.restore(&restored)?;
                outliers.retain(|i| !restored.contains(i));
            }
            trace.push(IterationRecord { iter: t, d_t, delta_max, removed: Vec::new() });
            break StopReason::Converged;
        }

        let mut ranked: Vec<usize> = (0..live.len()).collect();
        ranked.sort_by(|&a, &b| deltas[b].total_cmp(&deltas[a]).then(live[a].cmp(&live[b])));
        let batch: Vec<usize> = ranked[..cfg.k].iter().map(|&p| live[p]).collect();
        state.remove(&batch)?;
        outliers.extend_from_slice(&batch);
        trace.push(IterationRecord { iter: t, d_t, delta_max, removed: batch });
    };

    outliers.sort_unstable();
    restored.sort_unstable();
    Ok(FilterResult {
        outlier_ids: outliers,
        survivor_ids: state.live_rows(),
        restored_ids: restored,
        trace,
        stop_reason,
    })
}

/// Survivor bookkeeping plus the aggregator-specific centre computations.
enum State<'a> {
    Ewm { g: &'a GradientMatrix, index: ColumnOrderIndex },
    Subset { g: &'a GradientMatrix, live: Vec<bool>, agg: Aggregator },
}

impl<'a> State<'a> {
    fn new(g: &'a GradientMatrix, agg: Aggregator) -> Self {
        match agg {
            Aggregator::Ewm => State::Ewm { g, index: ColumnOrderIndex::build(g) },
            _ => State::Subset { g, live: vec![true; g.rows()], agg },
        }
    }

    fn live_rows(&self) -> Vec<usize> {
        match self {
            State::Ewm { index, .. } => index.live_rows(),
            State::Subset { live, .. } => (0..live.len()).filter(|&i| live[i]).collect(),
        }
    }

    fn live_count(&self) -> usize {
        match self {
            State::Ewm { index, .. } => index.live_count(),
            State::Subset { live, .. } => live.iter().filter(|&&l| l).count(),
        }
    }

    fn center(&self) -> Result<Vec<f64>> {
        match self {
            State::Ewm { g, index } => Ok(index.median(g)?.0),
            State::Subset { g, agg, .. } => aggregate(g, &self.live_rows(), *agg, None),
        }
    }

    fn loo(&self, row: usize, center: &[f64]) -> Result<Vec<f64>> {
        match self {
            State::Ewm { g, index } => Ok(index.loo_median(g, row)?.0),
            State::Subset { g, agg, .. } => {
                let ids: Vec<usize> = self.live_rows().into_iter().filter(|&i| i != row).collect();
                aggregate(g, &ids, *agg, Some(center))
            }
        }
    }

    fn remove(&mut self, ids: &[usize]) -> Result<()> {
        match self {
            State::Ewm { index, .. } => index.remove_rows(ids),
            State::Subset { live, .. } => {
                ids.iter().for_each(|&i| live[i] = false);
                Ok(())
            }
        }
    }

    fn restore(&mut self, ids: &[usize]) -> Result<()> {
        match self {
            State::Ewm { g, index } => index.restore_rows(g, ids),
            State::Subset { live, .. } => {
                ids.iter().for_each(|&i| live[i] = true);
                Ok(())
            }
        }
    }
}

fn aggregate(g: &GradientMatrix, ids: &[usize], agg: Aggregator, init: Option<&[f64]>) -> Result<Vec<f64>> {
    match agg {
        Aggregator::Ewm | Aggregator::EwmNaive => Ok(element_wise_median_of_rows(g, ids)?.0),
        Aggregator::Geometric { tol, max_iter } => Ok(geometric_median_of_rows(g, ids, init, tol, max_iter)?.point.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64, k: usize, rule: StopRule) -> FilterConfig {
        FilterConfig { eps_stop: eps, k, max_iter: 40, stop_rule: rule, aggregator: Aggregator::Ewm }
    }

    #[test]
    fn all_equal_gradients_flag_nothing() {
        let g = GradientMatrix::from_rows(&vec![[0.5, -1.0]; 10]).unwrap();
        for rule in [StopRule::LooDrop, StopRule::IterationDrop] {
            let r = medix_filter_gradients(&g, &[0.5, -1.0], &cfg(5e-3, 2, rule)).unwrap();
            assert!(r.outlier_ids.is_empty(), "{rule:?}");
            assert_eq!(r.survivor_ids.len(), 10);
            assert_eq!(r.stop_reason, StopReason::Converged);
            assert_eq!(r.trace.last().unwrap().d_t, 0.0);
        }
    }

    #[test]
    fn rejects_oversized_batch_and_bad_reference() {
        let g = GradientMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(matches!(
            medix_filter_gradients(&g, &[0.0], &cfg(1e-3, 2, StopRule::LooDrop)),
            Err(MedixError::WildSetTooSmall { m: 2, k: 2 })
        ));
        assert!(matches!(
            medix_filter_gradients(&g, &[0.0, 1.0], &cfg(1e-3, 1, StopRule::LooDrop)),
            Err(MedixError::DimensionMismatch { .. })
        ));
        assert!(medix_filter_gradients(&g, &[0.0], &cfg(0.0, 1, StopRule::LooDrop)).is_err());
    }

    #[test]
    fn obvious_outliers_end_up_flagged() {
        let mut rows: Vec<[f64; 2]> = (0..20).map(|i| [f64::from(i) * 0.01, f64::from((i * 7) % 20) * 0.01]).collect();
        rows.extend([[9.0, 9.0], [8.0, 9.5], [9.5, 8.0]]);
        let g = GradientMatrix::from_rows(&rows).unwrap();
        let r = medix_filter_gradients(&g, &[0.0, 0.0], &cfg(1e-4, 1, StopRule::LooDrop)).unwrap();
        assert!([20, 21, 22].iter().all(|i| r.outlier_ids.contains(i)), "{r:?}");
    }

    #[test]
    fn max_iter_and_exhaustion() {
        let rows: Vec<[f64; 1]> = (0..10).map(|i| [f64::from(i)]).collect();
        let g = GradientMatrix::from_rows(&rows).unwrap();
        let mut c = cfg(1e-12, 3, StopRule::IterationDrop);
        c.max_iter = 2;
        let r = medix_filter_gradients(&g, &[100.0], &c).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxIter);
        assert_eq!(r.outlier_ids.len(), 6);
        c.max_iter = 40;
        let r = medix_filter_gradients(&g, &[100.0], &c).unwrap();
        assert_eq!(r.stop_reason, StopReason::Exhausted);
        assert_eq!(r.survivor_ids.len(), 1);
        assert_eq!(r.survivor_ids, vec![9]);
    }
}
