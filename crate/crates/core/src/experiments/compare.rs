use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{classifier_world, ensure_dir, write_text, Artifacts, ExpResult, ExperimentError, RunConfig, StageExt};
use crate::filter::{err_rates, medix_filter, Aggregator, Origin, WildSet};
use crate::stats::{element_wise_median, geometric_median, l2_distance};

/// One (seed, contamination level) cell of the aggregator comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub seed: u64,
    pub n_ood: usize,
    /// Fraction of true OOD samples flagged.
    pub ewm_removal: f64,
    pub gm_removal: f64,
    pub ewm_err_in: f64,
    pub gm_err_in: f64,
    /// ‖centre(all wild gradients) − reference‖₂ before filtering.
    pub ewm_deviation: f64,
    pub gm_deviation: f64,
}

const ROW_HEADER: &str = "seed,n_ood,ewm_removal,gm_removal,ewm_err_in,gm_err_in,ewm_deviation,gm_deviation";

impl CompareRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.n_ood,
            self.ewm_removal,
            self.gm_removal,
            self.ewm_err_in,
            self.gm_err_in,
            self.ewm_deviation,
            self.gm_deviation
        )
    }
}

/// For each seed in `seed..seed + cmp_seeds` and each OOD count in
/// `cmp_levels`: the InD wild pool plus that many OOD samples is filtered
/// once with the element-wise median and once with the geometric median.
pub fn run_ewm_vs_gm(cfg: &RunConfig) -> ExpResult<Vec<CompareRow>> {
    if cfg.cmp_levels.is_empty() || cfg.cmp_seeds == 0 || cfg.cmp_ind_per_class == 0 {
        return Err(ExperimentError::Config("ewm-vs-gm needs cmp_levels, cmp_seeds ≥ 1, cmp_ind_per_class ≥ 1".into()));
    }
    if cfg.cmp_levels.contains(&0) {
        return Err(ExperimentError::Config("cmp_levels must be positive".into()));
    }
    let world_cfg = RunConfig {
        n_per_class: cfg.cmp_ind_per_class,
        n_ood: cfg.cmp_levels.iter().copied().max().unwrap_or(1),
        pi: None,
        prefilter: None,
        ..cfg.clone()
    };
    let mut rows = Vec::new();
    for s in 0..cfg.cmp_seeds as u64 {
        let seed = cfg.seed.wrapping_add(s);
        let cw = classifier_world(&world_cfg, seed)?;
        let level_rows = cfg
            .cmp_levels
            .par_iter()
            .map(|&n| {
                let ind = &cw.world.ind_pool;
                let features: Vec<Vec<f64>> = ind.iter().chain(&cw.world.ood_pool[..n]).cloned().collect();
                let origin: Vec<Origin> =
                    std::iter::repeat_n(Origin::Ind, ind.len()).chain(std::iter::repeat_n(Origin::Ood, n)).collect();
                let wild = WildSet::from_model(features, origin, &cw.model, cw.layout).stage("gradients")?;
                let base = world_cfg.filter_config(wild.len(), cw.sigma_hat)?;
                let run = |aggregator| {
                    let fcfg = crate::filter::FilterConfig { aggregator, ..base.clone() };
                    let res = medix_filter(&wild, &cw.reference, &fcfg).stage("filter")?;
                    let r = err_rates(&res, &wild);
                    Ok::<_, ExperimentError>((r.ood_recall().unwrap_or(0.0), r.err_in.unwrap_or(0.0)))
                };
                let (ewm_removal, ewm_err_in) = run(Aggregator::Ewm)?;
                let (gm_removal, gm_err_in) = run(Aggregator::geometric())?;
                let g = wild.gradients();
                let ewm_center = element_wise_median(g);
                let gm_center = geometric_median(g, 1e-7, 200).stage("aggregate")?;
                Ok(CompareRow {
                    seed,
                    n_ood: n,
                    ewm_removal,
                    gm_removal,
                    ewm_err_in,
                    gm_err_in,
                    ewm_deviation: l2_distance(&ewm_center.0, cw.reference.values()).stage("aggregate")?,
                    gm_deviation: l2_distance(&gm_center.point.0, cw.reference.values()).stage("aggregate")?,
                })
            })
            .collect::<ExpResult<Vec<_>>>()?;
        rows.extend(level_rows);
    }
    Ok(rows)
}

/// Per-level means over seeds, in `cmp_levels` order.
pub(crate) fn level_means(rows: &[CompareRow], levels: &[usize]) -> Vec<CompareRow> {
    levels
        .iter()
        .map(|&n| {
            let sel: Vec<&CompareRow> = rows.iter().filter(|r| r.n_ood == n).collect();
            let k = sel.len() as f64;
            let mean = |f: fn(&CompareRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / k;
            CompareRow {
                seed: 0,
                n_ood: n,
                ewm_removal: mean(|r| r.ewm_removal),
                gm_removal: mean(|r| r.gm_removal),
                ewm_err_in: mean(|r| r.ewm_err_in),
                gm_err_in: mean(|r| r.gm_err_in),
                ewm_deviation: mean(|r| r.ewm_deviation),
                gm_deviation: mean(|r| r.gm_deviation),
            }
        })
        .collect()
}

/// Writes `ewm_vs_gm.csv` (per seed), `ewm_vs_gm_summary.csv` (means over
/// seeds) and `ewm_vs_gm.svg` (removal proportions from the summary).
pub fn cmd_ewm_vs_gm(cfg: &RunConfig, out: &Path) -> ExpResult<Artifacts> {
    let rows = run_ewm_vs_gm(cfg)?;
    let means = level_means(&rows, &cfg.cmp_levels);
    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut csv = format!("{ROW_HEADER}\n");
    rows.iter().for_each(|r| csv.push_str(&(r.csv() + "\n")));
    write_text(out, "ewm_vs_gm.csv", &csv, &mut files)?;

    let mut summary_csv = String::from("n_ood,ewm_removal,gm_removal,ewm_err_in,gm_err_in,ewm_deviation,gm_deviation\n");
    for r in &means {
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n_ood, r.ewm_removal, r.gm_removal, r.ewm_err_in, r.gm_err_in, r.ewm_deviation, r.gm_deviation
        ));
    }
    write_text(out, "ewm_vs_gm_summary.csv", &summary_csv, &mut files)?;
    let svg = crate::plot::lines_from_csv(
        &summary_csv,
        "n_ood",
        &["ewm_removal", "gm_removal"],
        "True-OOD removal: element-wise vs geometric median",
        "removed fraction",
    )
    .map_err(|e| ExperimentError::Stage { stage: "plot", source: crate::MedixError::DegenerateDataset(e) })?;
    write_text(out, "ewm_vs_gm.svg", &svg, &mut files)?;

    let mut summary = format!("mean over {} seeds\n n_ood  ewm_removal  gm_removal  ewm_dev  gm_dev\n", cfg.cmp_seeds);
    for r in &means {
        summary.push_str(&format!(
            "{:>6}  {:>11.4}  {:>10.4}  {:>7.4}  {:>6.4}\n",
            r.n_ood, r.ewm_removal, r.gm_removal, r.ewm_deviation, r.gm_deviation
        ));
    }
    Ok(Artifacts { files, summary: summary.trim_end().to_string() })
}
