//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use medix::filter::{FilterResult, StopReason, StopRule};
use medix::rng::Philox;
use medix::stats::GradientMatrix;

/// Median of a slice by full sort; even counts average the middle pair.
pub fn naive_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Element-wise median over the given rows, recomputed from scratch.
pub fn naive_ewm(g: &GradientMatrix, rows: &[usize]) -> Vec<f64> {
    (0..g.cols())
        .map(|j| naive_median(&rows.iter().map(|&i| g.get(i, j)).collect::<Vec<_>>()))
        .collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Outcome of [`naive_filter`]: removal batches per iteration, final
/// outliers (ascending) and the stop reason.
#[derive(Debug, PartialEq)]
pub struct NaiveRun {
    pub batches: Vec<Vec<usize>>,
    pub outliers: Vec<usize>,
    pub reason: StopReason,
}

/// Greedy leave-one-out EWM filter with every median recomputed by sorting.
pub fn naive_filter(g: &GradientMatrix, reference: &[f64], eps: f64, k: usize, max_iter: usize, rule: StopRule) -> NaiveRun {
    let mut live: Vec<usize> = (0..g.rows()).collect();
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut dists: Vec<f64> = Vec::new();
    let reason = loop {
        if batches.len() == max_iter {
            break StopReason::MaxIter;
        }
        if live.len() <= k {
            break StopReason::Exhausted;
        }
        let d_t = dist(&naive_ewm(g, &live), reference);
        let mut scored: Vec<(f64, usize)> = live
            .iter()
            .map(|&i| {
                let rest: Vec<usize> = live.iter().copied().filter(|&r| r != i).collect();
                (d_t - dist(&naive_ewm(g, &rest), reference), i)
            })
            .collect();
        let delta_max = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        let t = batches.len();
        let stop = match rule {
            StopRule::LooDrop => delta_max <= eps,
            StopRule::IterationDrop => t > 0 && dists[t - 1] - d_t <= eps,
        };
        if stop {
            if rule == StopRule::IterationDrop {
                let back = batches.pop().unwrap();
                live.extend(back);
                live.sort_unstable();
            }
            break StopReason::Converged;
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let batch: Vec<usize> = scored[..k].iter().map(|s| s.1).collect();
        live.retain(|i| !batch.contains(i));
        batches.push(batch);
        dists.push(d_t);
    };
    let mut outliers: Vec<usize> = batches.iter().flatten().copied().collect();
    outliers.sort_unstable();
    NaiveRun { batches, outliers, reason }
}

/// Removal batches of a library run, dropping a batch restored at the stop.
pub fn kept_batches(r: &FilterResult) -> Vec<Vec<usize>> {
    r.trace
        .iter()
        .map(|t| t.removed.clone())
        .filter(|b| !b.is_empty() && !b.iter().all(|i| r.restored_ids.contains(i)))
        .collect()
}

/// Random matrix with m ≤ max_m rows and d ≤ max_d columns; with
/// probability ½ the entries come from a 5-value grid so ties are common.
pub fn random_matrix(rng: &mut Philox, max_m: usize, max_d: usize) -> GradientMatrix {
    let m = 2 + rng.below(max_m - 1);
    let d = 1 + rng.below(max_d);
    let coarse = rng.below(2) == 0;
    let data = (0..m * d)
        .map(|_| if coarse { rng.below(5) as f64 - 2.0 } else { rng.standard_normal() })
        .collect();
    GradientMatrix::new(m, d, data).unwrap()
}

/// Random scores; `ties` rounds them to a coarse grid.
pub fn random_scores(rng: &mut Philox, n: usize, shift: f64, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let s = rng.standard_normal() + shift;
            if ties { (s * 2.0).round() / 2.0 } else { s }
        })
        .collect()
}

/// O(n²) pairwise AUROC: (#{in > out} + ½ #{in = out}) / (n_in n_out).
pub fn brute_auroc(s_in: &[f64], s_out: &[f64]) -> f64 {
    let mut wins = 0.0;
    for a in s_in {
        for b in s_out {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (s_in.len() as f64 * s_out.len() as f64)
}

/// FPR at the highest threshold (scanning every observed score) whose InD
/// TPR is at least `num/den`.
pub fn brute_fpr(s_in: &[f64], s_out: &[f64], num: usize, den: usize) -> f64 {
    let mut best: Option<f64> = None;
    for &t in s_in.iter().chain(s_out) {
        let hits = s_in.iter().filter(|&&s| s >= t).count();
        if hits * den >= num * s_in.len() && best.is_none_or(|b| t > b) {
            best = Some(t);
        }
    }
    let t = best.expect("the minimum InD score always qualifies");
    s_out.iter().filter(|&&s| s >= t).count() as f64 / s_out.len() as f64
}
