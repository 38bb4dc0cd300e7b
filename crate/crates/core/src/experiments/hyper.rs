use std::path::Path;

use serde::Serialize;

use super::{cell, classifier_world, ensure_dir, write_text, Artifacts, ExpResult, ExperimentError, RunConfig, StageExt};
use crate::filter::{err_rates, medix_filter, FilterConfig};

/// One (eps_stop, k) grid cell. Detector metrics are `None` when the filter
/// flagged nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperRow {
    pub eps_stop: f64,
    pub k: usize,
    pub n_flagged: usize,
    pub err_in: Option<f64>,
    pub err_out: Option<f64>,
    pub fpr95: Option<f64>,
    pub auroc: Option<f64>,
}

fn grid(cfg: &RunConfig, m: usize) -> ExpResult<(Vec<f64>, Vec<usize>)> {
    let ks = if cfg.hyper_k.is_empty() { [40, 20, 10, 5].iter().map(|d| (m / d).max(1)).collect() } else { cfg.hyper_k.clone() };
    if cfg.hyper_eps.is_empty() {
        return Err(ExperimentError::Config("hyper_eps must not be empty".into()));
    }
    if let Some(e) = cfg.hyper_eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(ExperimentError::Config(format!("hyper_eps value {e} must be positive and finite")));
    }
    if let Some(k) = ks.iter().find(|&&k| k == 0 || k >= m) {
        return Err(ExperimentError::Config(format!("hyper_k value {k} must lie in [1, {m})")));
    }
    Ok((cfg.hyper_eps.clone(), ks))
}

/// Filters the synth2d wild set once per (eps_stop, k) pair, retrains the
/// detector on each flagged set and scores it on held-out draws.
pub fn run_hyper_sweep(cfg: &RunConfig) -> ExpResult<Vec<HyperRow>> {
    let cw = classifier_world(cfg, cfg.seed)?;
    let (eps_grid, k_grid) = grid(cfg, cw.wild.len())?;
    let base = cw.filter_config(cfg)?;
    let mut rows = Vec::with_capacity(eps_grid.len() * k_grid.len());
    for &eps_stop in &eps_grid {
        for &k in &k_grid {
            let fcfg = FilterConfig { eps_stop, k, ..base.clone() };
            let res = medix_filter(&cw.wild, &cw.reference, &fcfg).stage("filter")?;
            let rates = err_rates(&res, &cw.wild);
            let (fpr95, auroc) = if res.outlier_ids.is_empty() {
                (None, None)
            } else {
                let (_, m, _) = cw.detect(cfg, &res.outlier_ids, cfg.seed)?;
                (Some(m.fpr95), Some(m.auroc))
            };
            rows.push(HyperRow {
                eps_stop,
                k,
                n_flagged: res.outlier_ids.len(),
                err_in: rates.err_in,
                err_out: rates.err_out,
                fpr95,
                auroc,
            });
        }
    }
    Ok(rows)
}

/// Writes `hyper_sweep.csv`, one row per grid cell.
pub fn cmd_hyper_sweep(cfg: &RunConfig, out: &Path) -> ExpResult<Artifacts> {
    let rows = run_hyper_sweep(cfg)?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut csv = String::from("eps_stop,k,n_flagged,err_in,err_out,fpr95,auroc\n");
    let mut summary = String::from("  eps_stop      k  flagged   ERR_in  ERR_out    FPR95    AUROC\n");
    let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.eps_stop,
            r.k,
            r.n_flagged,
            cell(r.err_in),
            cell(r.err_out),
            cell(r.fpr95),
            cell(r.auroc)
        ));
        summary.push_str(&format!(
            "{:>10.0e} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            r.eps_stop,
            r.k,
            r.n_flagged,
            show(r.err_in),
            show(r.err_out),
            show(r.fpr95),
            show(r.auroc)
        ));
    }
    write_text(out, "hyper_sweep.csv", &csv, &mut files)?;
    Ok(Artifacts { files, summary: summary.trim_end().to_string() })
}
