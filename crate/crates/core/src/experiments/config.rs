use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExpResult, ExperimentError};
use crate::detector::DetectorConfig;
use crate::filter::{Aggregator, FilterConfig, StopRule};
use crate::gradients::{Loss, TrainConfig};
use crate::synth::{MixtureSpec, Tail};

/// Every tunable of every subcommand as one flat key-value table. Unknown
/// keys are rejected so typos surface as configuration errors.
///
/// Optional keys left unset fall back to data-dependent defaults: `eps_stop`
/// to `eps_scale · σ̂` (σ̂ = largest per-coordinate std of the reference
/// gradients), `k` to `max(1, m/20)`, `sigma_out` to `sigma`, `mu4` to the
/// tail family's fourth moment and `eps_dev` to the default tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,

    // mixture world (synth2d, hyper-sweep, ewm-vs-gm)
    pub class_means: Vec<Vec<f64>>,
    pub cov_scale: f64,
    pub ood_mean: Vec<f64>,
    pub ood_cov_scale: f64,
    pub n_per_class: usize,
    pub n_ood: usize,
    /// Contamination of the wild set; unset keeps both pools whole.
    pub pi: Option<f64>,
    pub n_test_per_class: usize,
    pub n_test_ood: usize,

    // InD classifier
    pub loss: String,
    pub include_bias: bool,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Drop wild samples whose pseudo-label confidence is below this.
    pub prefilter: Option<f64>,

    // filter
    pub stop_rule: String,
    pub aggregator: String,
    pub eps_stop: Option<f64>,
    pub eps_scale: f64,
    pub k: Option<usize>,
    pub max_iter: usize,

    // detector
    pub det_lr: f64,
    pub det_epochs: usize,
    pub ind_loss_weight: f64,

    // sweep
    pub sweep_dim: usize,
    pub sweep_sigma: f64,
    pub sweep_separation: f64,
    pub sweep_n_in: usize,
    pub sweep_steps: Vec<usize>,

    // bounds
    pub sigma: f64,
    pub sigma_out: Option<f64>,
    pub mu4: Option<f64>,
    pub bound_pi: f64,
    pub m: usize,
    pub dim: usize,
    pub delta: f64,
    pub separation: f64,
    pub eps_dev: Option<f64>,
    pub tail: String,
    /// Monte-Carlo trials per bound; 0 skips the coverage run.
    pub coverage_trials: usize,

    // ewm-vs-gm
    pub cmp_levels: Vec<usize>,
    pub cmp_ind_per_class: usize,
    pub cmp_seeds: usize,

    // hyper-sweep
    pub hyper_eps: Vec<f64>,
    /// Batch sizes; empty means m/40, m/20, m/10, m/5.
    pub hyper_k: Vec<usize>,

    // filter / metrics file inputs
    pub gradients: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub scores_in: Option<PathBuf>,
    pub scores_out: Option<PathBuf>,
    pub tpr: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = MixtureSpec::three_gaussians();
        RunConfig {
            seed: 0,
            out: None,
            class_means: base.class_means,
            cov_scale: base.cov_scale,
            ood_mean: base.ood_mean,
            ood_cov_scale: base.ood_cov_scale,
            n_per_class: base.n_per_class,
            n_ood: base.n_ood,
            pi: None,
            n_test_per_class: 200,
            n_test_ood: 600,
            loss: Loss::SquaredError.to_string(),
            include_bias: true,
            lr: 0.1,
            epochs: 200,
            batch: 64,
            prefilter: None,
            stop_rule: "iteration".into(),
            aggregator: "ewm".into(),
            eps_stop: None,
            eps_scale: 0.05,
            k: None,
            max_iter: 40,
            det_lr: 0.1,
            det_epochs: 300,
            ind_loss_weight: 10.0,
            sweep_dim: 10,
            sweep_sigma: 1.0,
            sweep_separation: 1.0,
            sweep_n_in: 500,
            sweep_steps: (0..10).map(|i| 50 * i).collect(),
            sigma: 1.0,
            sigma_out: None,
            mu4: None,
            bound_pi: 0.5,
            m: 10_000,
            dim: 10,
            delta: 0.1,
            separation: 10.0,
            eps_dev: None,
            tail: "gaussian".into(),
            coverage_trials: 0,
            cmp_levels: vec![15, 30, 60, 90, 120],
            cmp_ind_per_class: 50,
            cmp_seeds: 5,
            hyper_eps: vec![5e-5, 5e-4, 5e-3, 5e-2],
            hyper_k: Vec::new(),
            gradients: None,
            reference: None,
            scores_in: None,
            scores_out: None,
            tpr: 0.95,
        }
    }
}

fn cfg_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

impl RunConfig {
    /// Parses a TOML file; missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> ExpResult<Self> {
        toml::from_str(text).map_err(cfg_err)
    }

    pub fn from_file(path: &Path) -> ExpResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn mixture(&self, seed: u64) -> ExpResult<MixtureSpec> {
        let spec = MixtureSpec {
            class_means: self.class_means.clone(),
            cov_scale: self.cov_scale,
            ood_mean: self.ood_mean.clone(),
            ood_cov_scale: self.ood_cov_scale,
            n_per_class: self.n_per_class,
            n_ood: self.n_ood,
            seed,
        };
        spec.validate().map_err(cfg_err)?;
        Ok(spec)
    }

    pub fn train_config(&self, seed: u64) -> ExpResult<TrainConfig> {
        if !(self.lr > 0.0) || self.epochs == 0 || self.batch == 0 {
            return Err(cfg_err("classifier needs lr > 0, epochs ≥ 1, batch ≥ 1"));
        }
        Ok(TrainConfig { lr: self.lr, epochs: self.epochs, batch: self.batch, seed, loss: self.loss.parse().map_err(cfg_err)? })
    }

    pub fn detector_config(&self, seed: u64) -> ExpResult<DetectorConfig> {
        if !(self.det_lr > 0.0) || self.det_epochs == 0 || !(self.ind_loss_weight >= 0.0) {
            return Err(cfg_err("detector needs det_lr > 0, det_epochs ≥ 1, ind_loss_weight ≥ 0"));
        }
        Ok(DetectorConfig { lr: self.det_lr, epochs: self.det_epochs, ind_loss_weight: self.ind_loss_weight, seed })
    }

    /// Filter settings for a wild set of `m` rows whose reference gradients
    /// have noise scale `sigma_hat`.
    pub fn filter_config(&self, m: usize, sigma_hat: f64) -> ExpResult<FilterConfig> {
        if !(self.eps_scale > 0.0) {
            return Err(cfg_err("eps_scale must be positive"));
        }
        let cfg = FilterConfig {
            eps_stop: self.eps_stop.unwrap_or((self.eps_scale * sigma_hat).max(1e-12)),
            k: self.k.unwrap_or((m / 20).max(1)),
            max_iter: self.max_iter,
            stop_rule: self.stop_rule.parse::<StopRule>().map_err(cfg_err)?,
            aggregator: self.aggregator.parse::<Aggregator>().map_err(cfg_err)?,
        };
        cfg.validate().map_err(cfg_err)?;
        if cfg.k >= m {
            return Err(cfg_err(format!("k = {} must be smaller than the wild set size {m}", cfg.k)));
        }
        Ok(cfg)
    }

    pub fn tail(&self) -> ExpResult<Tail> {
        self.tail.parse().map_err(cfg_err)
    }

    pub(crate) fn require(&self, path: &Option<PathBuf>, key: &str) -> ExpResult<PathBuf> {
        let p = path.clone().ok_or_else(|| cfg_err(format!("missing `{key}`")))?;
        if !p.is_file() {
            return Err(cfg_err(format!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig { seed: 7, pi: Some(0.3), ..RunConfig::default() };
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn unknown_and_bad_keys_are_config_errors() {
        assert!(matches!(RunConfig::from_toml_str("sed = 3"), Err(ExperimentError::Config(_))));
        let c = RunConfig::from_toml_str("stop_rule = \"sometimes\"").unwrap();
        assert!(c.filter_config(100, 1.0).is_err());
        let c = RunConfig::from_toml_str("k = 100").unwrap();
        assert!(c.filter_config(100, 1.0).is_err());
    }

    #[test]
    fn filter_defaults_scale_with_noise() {
        let f = RunConfig::default().filter_config(1200, 0.4).unwrap();
        assert_eq!(f.k, 60);
        assert!((f.eps_stop - 0.02).abs() < 1e-15);
        assert_eq!(f.stop_rule, StopRule::IterationDrop);
    }
}
