use std::path::Path;

use super::{ensure_dir, write_text, Artifacts, ExpResult, ExperimentError, RunConfig, StageExt};
use crate::filter::{deviation_sweep, SweepPoint};
use crate::synth::{gradient_pools, Tail};

/// Spearman rank correlation with mid-ranks for ties; `None` when either
/// input is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (mid_ranks(x), mid_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        idx[i..=j].iter().for_each(|&k| ranks[k] = r);
        i = j + 1;
    }
    ranks
}

/// Deviation of the EWM from the InD mean gradient as OOD rows are added,
/// plus the Spearman correlation between OOD count and deviation.
pub fn run_sweep(cfg: &RunConfig, seed: u64) -> ExpResult<(Vec<SweepPoint>, Option<f64>)> {
    let n_out = cfg.sweep_steps.iter().copied().max().unwrap_or(0).max(1);
    let pools = gradient_pools(
        &vec![0.0; cfg.sweep_dim],
        cfg.sweep_sigma,
        cfg.sweep_separation,
        cfg.sweep_n_in,
        n_out,
        Tail::Gaussian,
        seed,
    )
    .stage("world")?;
    let reference = pools.ind.column_means();
    let points = deviation_sweep(&pools.ind, &pools.ood, &reference, &cfg.sweep_steps).stage("sweep")?;
    let xs: Vec<f64> = points.iter().map(|p| p.n_ood as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.deviation).collect();
    Ok((points, spearman(&xs, &ys)))
}

/// Writes `sweep.csv` (`n_ood,deviation`) and `sweep.svg`.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> ExpResult<Artifacts> {
    if cfg.sweep_steps.is_empty() {
        return Err(ExperimentError::Config("sweep_steps must not be empty".into()));
    }
    let (points, rho) = run_sweep(cfg, cfg.seed)?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut csv = String::from("n_ood,deviation\n");
    points.iter().for_each(|p| csv.push_str(&format!("{},{}\n", p.n_ood, p.deviation)));
    write_text(out, "sweep.csv", &csv, &mut files)?;
    let svg = crate::plot::lines_from_csv(&csv, "n_ood", &["deviation"], "EWM deviation from the InD mean", "L2 distance")
        .map_err(|e| ExperimentError::Stage { stage: "plot", source: crate::MedixError::DegenerateDataset(e) })?;
    write_text(out, "sweep.svg", &svg, &mut files)?;
    let mut summary = String::from("n_ood  deviation\n");
    points.iter().for_each(|p| summary.push_str(&format!("{:>5}  {:.6}\n", p.n_ood, p.deviation)));
    summary.push_str(&format!("spearman = {}", rho.map_or_else(|| "undefined".into(), |r| format!("{r:.4}"))));
    Ok(Artifacts { files, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        assert_eq!(mid_ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }
}
