use std::path::Path;
use std::time::Instant;

use super::{cell, ensure_dir, write_text, Artifacts, ExpResult, ExperimentError, RunConfig, StageExt};
use crate::bounds::estimate_sigma;
use crate::detector::{auroc, fpr_at_tpr, ind_accuracy, train_ood_detector, DetectionMetrics, DetectorFit};
use crate::filter::{err_rates, flagged_ind_fraction, medix_filter, ErrorRates, FilterConfig, FilterResult, WildSet};
use crate::gradients::{
    confidence_prefilter, gradient_matrix, reference_gradient, train_ind_classifier, GradientLayout, IndModel,
    LabeledDataset, ReferenceGradient,
};
use crate::synth::{gaussian_world, held_out, make_wild, split_counts, MixedSample, MixtureSpec, SyntheticWorld};

/// Everything up to (not including) the filter: the mixture world, the
/// trained InD classifier, the reference gradient and the wild gradients.
#[derive(Debug, Clone)]
pub struct ClassifierWorld {
    pub spec: MixtureSpec,
    pub world: SyntheticWorld,
    /// The wild samples the filter sees (after any confidence pre-filter).
    pub sample: MixedSample,
    pub model: IndModel,
    pub layout: GradientLayout,
    pub reference: ReferenceGradient,
    /// Largest per-coordinate std of the training-set per-sample gradients.
    pub sigma_hat: f64,
    pub wild: WildSet,
    /// Fraction of wild samples dropped by the confidence pre-filter.
    pub prefiltered: f64,
}

/// Largest wild set `make_wild` can draw from pools of the given sizes.
fn max_wild_size(n_ind: usize, n_ood: usize, pi: f64) -> usize {
    // the ratio bound is only approximate once the split is rounded, so
    // search down from just above it
    let approx = if pi >= 1.0 { n_ood } else { ((n_ind as f64 / (1.0 - pi)).min(n_ood as f64 / pi)).floor() as usize };
    let mut m = (approx + 2).min(n_ind + n_ood);
    while m > 0 {
        match split_counts(pi, m) {
            Ok((a, b)) if a <= n_ind && b <= n_ood => break,
            _ => m -= 1,
        }
    }
    m
}

/// Builds the mixture world for `seed`, trains f_φ and extracts the wild
/// gradients at the pseudo-labels.
pub fn classifier_world(cfg: &RunConfig, seed: u64) -> ExpResult<ClassifierWorld> {
    let spec = cfg.mixture(seed)?;
    let world = gaussian_world(&spec).stage("world")?;
    let sample = match cfg.pi {
        None => world.wild.clone(),
        Some(pi) => {
            let m = max_wild_size(world.ind_pool.len(), world.ood_pool.len(), pi);
            make_wild(&world.ind_pool, &world.ood_pool, pi, m, seed).stage("wild")?
        }
    };
    let model = train_ind_classifier(&world.train, &cfg.train_config(seed)?).stage("train")?;
    let layout = GradientLayout { include_bias: cfg.include_bias };
    let reference = reference_gradient(&model, &world.train, layout).stage("reference")?;
    let train_g = gradient_matrix(&model, world.train.features(), world.train.labels(), layout).stage("reference")?;
    let sigma_hat = estimate_sigma(&train_g);
    let mut wild =
        WildSet::from_model(sample.features.clone(), sample.origin.clone(), &model, layout).stage("gradients")?;
    let mut sample = sample;
    let mut prefiltered = 0.0;
    if let Some(threshold) = cfg.prefilter {
        let pf = confidence_prefilter(&model, &wild, threshold).stage("prefilter")?;
        sample = MixedSample {
            features: pf.kept_ids.iter().map(|&i| sample.features[i].clone()).collect(),
            origin: pf.kept_ids.iter().map(|&i| sample.origin[i]).collect(),
            sample_ids: pf.kept_ids.iter().map(|&i| sample.sample_ids[i]).collect(),
        };
        wild = pf.kept.ok_or_else(|| {
            ExperimentError::Config(format!("prefilter threshold {threshold} removes every wild sample"))
        })?;
        prefiltered = pf.removed_fraction;
    }
    Ok(ClassifierWorld { spec, world, sample, model, layout, reference, sigma_hat, wild, prefiltered })
}

impl ClassifierWorld {
    pub fn filter_config(&self, cfg: &RunConfig) -> ExpResult<FilterConfig> {
        cfg.filter_config(self.wild.len(), self.sigma_hat)
    }

    /// Trains g_θ on the training split vs the flagged wild samples and
    /// scores it on fresh held-out draws.
    pub fn detect(
        &self,
        cfg: &RunConfig,
        flagged: &[usize],
        seed: u64,
    ) -> ExpResult<(DetectorFit, DetectionMetrics, LabeledDataset)> {
        let outliers: Vec<Vec<f64>> = flagged.iter().map(|&i| self.sample.features[i].clone()).collect();
        let fit = train_ood_detector(&self.world.train, &outliers, &cfg.detector_config(seed)?).stage("detector")?;
        let (test_in, test_out) = held_out(&self.spec, cfg.n_test_per_class, cfg.n_test_ood).stage("evaluate")?;
        let det = &fit.detector;
        let s_in: Vec<f64> = test_in.features().iter().map(|x| det.score(x)).collect();
        let s_out: Vec<f64> = test_out.iter().map(|x| det.score(x)).collect();
        let tpr = s_in.iter().filter(|&&s| s >= det.threshold).count() as f64 / s_in.len() as f64;
        let head = fit.classifier.as_ref().unwrap_or(&self.model);
        let metrics = DetectionMetrics {
            fpr95: fpr_at_tpr(&s_in, &s_out, cfg.tpr).stage("evaluate")?,
            auroc: auroc(&s_in, &s_out).stage("evaluate")?,
            tpr,
            ind_acc: Some(ind_accuracy(head, &test_in)),
            err_in: None,
            err_out: None,
        };
        Ok((fit, metrics, test_in))
    }
}

/// Result of one synth2d pipeline run.
#[derive(Debug, Clone)]
pub struct Synth2dRun {
    pub world: ClassifierWorld,
    pub filter: FilterResult,
    pub rates: ErrorRates,
    /// Share of the flagged set that is truly InD.
    pub flagged_ind: Option<f64>,
    pub detector: DetectorFit,
    pub metrics: DetectionMetrics,
}

impl Synth2dRun {
    pub fn flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.world.wild.len()];
        self.filter.outlier_ids.iter().for_each(|&i| f[i] = true);
        f
    }
}

/// Mixture world → f_φ → reference gradient → filter → g_θ → held-out metrics.
pub fn run_synth2d(cfg: &RunConfig) -> ExpResult<Synth2dRun> {
    let world = classifier_world(cfg, cfg.seed)?;
    let fcfg = world.filter_config(cfg)?;
    let filter = medix_filter(&world.wild, &world.reference, &fcfg).stage("filter")?;
    let rates = err_rates(&filter, &world.wild);
    let flagged_ind = flagged_ind_fraction(&filter, world.wild.origin());
    if filter.outlier_ids.is_empty() {
        return Err(ExperimentError::Stage { stage: "detector", source: crate::MedixError::NoCandidateOutliers });
    }
    let (detector, mut metrics, _) = world.detect(cfg, &filter.outlier_ids, cfg.seed)?;
    metrics.err_in = rates.err_in;
    metrics.err_out = rates.err_out;
    Ok(Synth2dRun { world, filter, rates, flagged_ind, detector, metrics })
}

/// Runs the pipeline and writes `synth2d_metrics.csv`, `synth2d_points.csv`,
/// the filter JSON and trace, and the two scatter plots.
pub fn cmd_synth2d(cfg: &RunConfig, out: &Path) -> ExpResult<Artifacts> {
    let start = Instant::now();
    let run = run_synth2d(cfg)?;
    ensure_dir(out)?;
    let mut files = Vec::new();

    let m = &run.metrics;
    let metrics_csv = format!(
        "seed,m,pi,n_flagged,iterations,stop_reason,err_in,err_out,flagged_ind,fpr95,auroc,tpr,ind_acc\n{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        cfg.seed,
        run.world.wild.len(),
        run.world.sample.realized_pi(),
        run.filter.outlier_ids.len(),
        run.filter.iterations(),
        run.filter.stop_reason,
        cell(run.rates.err_in),
        cell(run.rates.err_out),
        cell(run.flagged_ind),
        m.fpr95,
        m.auroc,
        m.tpr,
        cell(m.ind_acc),
    );
    write_text(out, "synth2d_metrics.csv", &metrics_csv, &mut files)?;

    let mut points = String::from("x0,x1,__origin,pseudo_label,flagged\n");
    for (i, flagged) in run.flags().into_iter().enumerate() {
        let x = &run.world.sample.features[i];
        points.push_str(&format!(
            "{},{},{},{},{}\n",
            x[0],
            x.get(1).copied().unwrap_or(0.0),
            run.world.sample.origin[i],
            run.world.wild.pseudo_labels()[i],
            u8::from(flagged)
        ));
    }
    write_text(out, "synth2d_points.csv", &points, &mut files)?;

    let json = run.filter.to_json().stage("output")?;
    write_text(out, "synth2d_filter.json", &json, &mut files)?;
    let trace = out.join("synth2d_trace.csv");
    run.filter.write_trace_csv(&trace).stage("output")?;
    files.push(trace);

    let (truth, flagged) = crate::plot::synth2d_plots_from_csv(&points)
        .map_err(|e| ExperimentError::Stage { stage: "plot", source: crate::MedixError::DegenerateDataset(e) })?;
    write_text(out, "synth2d_truth.svg", &truth, &mut files)?;
    write_text(out, "synth2d_flagged.svg", &flagged, &mut files)?;

    let summary = format!(
        "synth2d seed={} m={} flagged={} ({} iterations, {})\n\
         ERR_in={}  OOD recall={}  flagged InD share={}{}\n{}\nelapsed {:.2}s",
        cfg.seed,
        run.world.wild.len(),
        run.filter.outlier_ids.len(),
        run.filter.iterations(),
        run.filter.stop_reason,
        pct(run.rates.err_in),
        pct(run.rates.ood_recall()),
        pct(run.flagged_ind),
        if run.world.prefiltered > 0.0 { format!("  prefiltered={}", pct(Some(run.world.prefiltered))) } else { String::new() },
        run.metrics,
        start.elapsed().as_secs_f64()
    );
    Ok(Artifacts { files, summary })
}

pub(crate) fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.2}%", 100.0 * x))
}
