use std::path::Path;

use super::{ensure_dir, write_text, Artifacts, ExpResult, ExperimentError, RunConfig, StageExt};
use crate::bounds::{
    contamination_term, default_epsilon, estimate_sigma_robust, inlier_bound, inlier_bound_heavy_tail, inlier_bound_proof_form,
    monte_carlo_coverage, outlier_bound, reverse_contamination_term, BoundInputs, BoundKind, BoundValue,
    CoverageScenario,
};
use crate::detector::{auroc, fpr_at_tpr};
use crate::filter::medix_filter_gradients;
use crate::stats::io::read_any;
use crate::synth::split_counts;
use crate::MedixError;

fn bound_inputs(cfg: &RunConfig) -> ExpResult<BoundInputs> {
    let tail = cfg.tail()?;
    let (m_in, _) = split_counts(cfg.bound_pi, cfg.m).stage("bounds")?;
    let eps_dev = match cfg.eps_dev {
        Some(e) => e,
        None => default_epsilon(cfg.sigma, cfg.dim, m_in.max(1)).stage("bounds")?,
    };
    Ok(BoundInputs {
        sigma: cfg.sigma,
        sigma_out: cfg.sigma_out.unwrap_or(cfg.sigma),
        mu4: cfg.mu4.unwrap_or_else(|| tail.fourth_moment(cfg.sigma)),
        pi: cfg.bound_pi,
        m: cfg.m,
        d: cfg.dim,
        delta: cfg.delta,
        separation: cfg.separation,
        eps_dev,
    })
}

/// Writes `bounds.csv` (one row per bound form) and, when
/// `coverage_trials > 0`, `bounds_coverage_<kind>.csv` for each kind.
pub fn cmd_bounds(cfg: &RunConfig, out: &Path) -> ExpResult<Artifacts> {
    let inputs = bound_inputs(cfg)?;
    let rows: Vec<(&str, f64, BoundValue)> = vec![
        ("inlier", contamination_term(inputs.pi), inlier_bound(&inputs).stage("bounds")?),
        ("inlier_proof_form", contamination_term(inputs.pi), inlier_bound_proof_form(&inputs).stage("bounds")?),
        ("outlier", reverse_contamination_term(inputs.pi), outlier_bound(&inputs).stage("bounds")?),
        ("inlier_heavy_tail", contamination_term(inputs.pi), inlier_bound_heavy_tail(&inputs).stage("bounds")?),
    ];
    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut csv = String::from("kind,pi,m,d,sigma,delta,separation,eps_dev,contamination,value,vacuous\n");
    let mut summary = format!(
        "pi={} m={} d={} sigma={} delta={} separation={} eps_dev={:.6}\n{:<18} {:>13} {:>12} {:>8}\n",
        inputs.pi, inputs.m, inputs.d, inputs.sigma, inputs.delta, inputs.separation, inputs.eps_dev, "bound", "contamination", "value", "vacuous"
    );
    for (kind, contamination, v) in &rows {
        csv.push_str(&format!(
            "{kind},{},{},{},{},{},{},{},{contamination},{},{}\n",
            inputs.pi, inputs.m, inputs.d, inputs.sigma, inputs.delta, inputs.separation, inputs.eps_dev, v.value, v.vacuous
        ));
        summary.push_str(&format!("{kind:<18} {contamination:>13.6} {:>12.6} {:>8}\n", v.value, v.vacuous));
    }
    write_text(out, "bounds.csv", &csv, &mut files)?;

    if cfg.coverage_trials > 0 {
        let scenario = CoverageScenario {
            tail: cfg.tail()?,
            sigma: cfg.sigma,
            separation: cfg.separation,
            pi: cfg.bound_pi,
            m: cfg.m,
            d: cfg.dim,
            delta: cfg.delta,
            eps_dev: cfg.eps_dev,
            filter: CoverageScenario::default_filter(cfg.m, cfg.sigma),
        };
        for kind in [BoundKind::Inlier, BoundKind::Outlier, BoundKind::InlierHeavyTail] {
            let report = monte_carlo_coverage(&scenario, kind, cfg.coverage_trials, cfg.seed).stage("coverage")?;
            let path = out.join(format!("bounds_coverage_{kind}.csv"));
            report.write_csv(&path).stage("output")?;
            files.push(path);
            summary.push_str(&format!(
                "coverage {kind}: {:.4} over {} trials (target ≥ {:.4})\n",
                report.coverage,
                cfg.coverage_trials,
                crate::bounds::coverage_threshold(cfg.delta, cfg.coverage_trials)
            ));
        }
    }
    Ok(Artifacts { files, summary: summary.trim_end().to_string() })
}

/// Filters a raw gradient file (CSV or binary) against a one-row reference
/// file; writes `filter.json`, `filter_trace.csv` and `filter_flags.csv`.
pub fn cmd_filter(cfg: &RunConfig, out: &Path) -> ExpResult<Artifacts> {
    let gpath = cfg.require(&cfg.gradients, "gradients")?;
    let rpath = cfg.require(&cfg.reference, "reference")?;
    let g = read_any(&gpath).stage("load")?;
    let r = read_any(&rpath).stage("load")?;
    if r.rows() != 1 {
        return Err(ExperimentError::Config(format!("reference file must hold exactly one row, found {}", r.rows())));
    }
    if r.cols() != g.cols() {
        return Err(ExperimentError::Config(format!(
            "reference has {} columns but gradients have {}",
            r.cols(),
            g.cols()
        )));
    }
    let fcfg = cfg.filter_config(g.rows(), estimate_sigma_robust(&g))?;
    let res = medix_filter_gradients(&g, r.row(0), &fcfg).stage("filter")?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    write_text(out, "filter.json", &(res.to_json().stage("output")? + "\n"), &mut files)?;
    let trace = out.join("filter_trace.csv");
    res.write_trace_csv(&trace).stage("output")?;
    files.push(trace);
    let mut flags = vec![0u8; g.rows()];
    res.outlier_ids.iter().for_each(|&i| flags[i] = 1);
    let mut csv = String::from("row,flagged\n");
    flags.iter().enumerate().for_each(|(i, f)| csv.push_str(&format!("{i},{f}\n")));
    write_text(out, "filter_flags.csv", &csv, &mut files)?;
    let summary = format!(
        "{} rows, d={}: flagged {} in {} iterations ({}), eps_stop={}, k={}",
        g.rows(),
        g.cols(),
        res.outlier_ids.len(),
        res.iterations(),
        res.stop_reason,
        fcfg.eps_stop,
        fcfg.k
    );
    Ok(Artifacts { files, summary })
}

/// Reads the `score` column of a CSV file.
pub fn read_scores(path: &Path) -> crate::Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h.trim() == "score")
        .ok_or_else(|| MedixError::Format { path: path.into(), reason: "no `score` column".into() })?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let f = rec.get(col).unwrap_or("").trim();
            f.parse::<f64>().map_err(|_| MedixError::Format { path: path.into(), reason: format!("bad score `{f}`") })
        })
        .collect()
}

/// FPR at the configured TPR and AUROC from two score files; writes `metrics.csv`.
pub fn cmd_metrics(cfg: &RunConfig, out: &Path) -> ExpResult<Artifacts> {
    let s_in = read_scores(&cfg.require(&cfg.scores_in, "scores_in")?).stage("load")?;
    let s_out = read_scores(&cfg.require(&cfg.scores_out, "scores_out")?).stage("load")?;
    let fpr = fpr_at_tpr(&s_in, &s_out, cfg.tpr).stage("metrics")?;
    let auc = auroc(&s_in, &s_out).stage("metrics")?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    let csv = format!("tpr_target,fpr,auroc,n_in,n_out\n{},{fpr},{auc},{},{}\n", cfg.tpr, s_in.len(), s_out.len());
    write_text(out, "metrics.csv", &csv, &mut files)?;
    let summary = format!("FPR@TPR{:.0}% = {:.4}\nAUROC = {:.4}", 100.0 * cfg.tpr, fpr, auc);
    Ok(Artifacts { files, summary })
}
