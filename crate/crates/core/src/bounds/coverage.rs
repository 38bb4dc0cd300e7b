use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{default_epsilon, inlier_bound, inlier_bound_heavy_tail, outlier_bound, BoundInputs, BoundValue};
use crate::error::{MedixError, Result};
use crate::filter::{err_rates_from_origin, medix_filter_gradients, Aggregator, FilterConfig, StopRule};
use crate::synth::{simulate_gradient_world, split_counts, GradientWorldSpec, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Inlier,
    Outlier,
    InlierHeavyTail,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Inlier => "inlier",
            BoundKind::Outlier => "outlier",
            BoundKind::InlierHeavyTail => "inlier_heavy_tail",
        })
    }
}

impl FromStr for BoundKind {
    type Err = MedixError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inlier" => Ok(BoundKind::Inlier),
            "outlier" => Ok(BoundKind::Outlier),
            "inlier_heavy_tail" | "heavy_tail" => Ok(BoundKind::InlierHeavyTail),
            other => Err(MedixError::invalid("bound_kind", format!("unknown bound `{other}`"))),
        }
    }
}

/// A simulated gradient world plus the filter run on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageScenario {
    pub tail: Tail,
    /// Per-coordinate InD scale (standard deviation).
    pub sigma: f64,
    /// Δ: OOD mean sits Δ√d away from the InD mean.
    pub separation: f64,
    pub pi: f64,
    pub m: usize,
    pub d: usize,
    pub delta: f64,
    /// Deviation tolerance ε; `None` picks `default_epsilon(σ, d, m_in)`.
    pub eps_dev: Option<f64>,
    pub filter: FilterConfig,
}

impl CoverageScenario {
    /// Filter defaults used for coverage runs: `IterationDrop` with
    /// eps_stop = 0.05σ, k = max(1, m/20), T = 40.
    pub fn default_filter(m: usize, sigma: f64) -> FilterConfig {
        FilterConfig {
            eps_stop: (0.05 * sigma).max(1e-12),
            k: (m / 20).max(1),
            max_iter: 40,
            stop_rule: StopRule::IterationDrop,
            aggregator: Aggregator::Ewm,
        }
    }

    pub fn gaussian(sigma: f64, separation: f64, pi: f64, m: usize, d: usize, delta: f64) -> Self {
        CoverageScenario {
            tail: Tail::Gaussian,
            sigma,
            separation,
            pi,
            m,
            d,
            delta,
            eps_dev: None,
            filter: Self::default_filter(m, sigma),
        }
    }

    /// Bound inputs implied by the scenario (σ_out = σ, μ₄ from the tail family).
    pub fn bound_inputs(&self) -> Result<BoundInputs> {
        let (m_in, _) = split_counts(self.pi, self.m)?;
        let eps_dev = match self.eps_dev {
            Some(e) => e,
            None => default_epsilon(self.sigma, self.d, m_in.max(1))?,
        };
        Ok(BoundInputs {
            sigma: self.sigma,
            sigma_out: self.sigma,
            mu4: self.tail.fourth_moment(self.sigma),
            pi: self.pi,
            m: self.m,
            d: self.d,
            delta: self.delta,
            separation: self.separation,
            eps_dev,
        })
    }

    pub fn bound(&self, kind: BoundKind) -> Result<BoundValue> {
        let inputs = self.bound_inputs()?;
        match kind {
            BoundKind::Inlier => inlier_bound(&inputs),
            BoundKind::Outlier => outlier_bound(&inputs),
            BoundKind::InlierHeavyTail => inlier_bound_heavy_tail(&inputs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub err_in: f64,
    pub err_out: f64,
    pub bound: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub kind: BoundKind,
    pub bound: BoundValue,
    pub trials: Vec<TrialRecord>,
    pub coverage: f64,
}

impl CoverageReport {
    /// CSV `trial,err_in,err_out,bound,within`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for t in &self.trials {
            w.serialize(t)?;
        }
        w.flush().map_err(|e| MedixError::io(path, e))
    }

    pub fn passes(&self, delta: f64) -> bool {
        self.coverage >= coverage_threshold(delta, self.trials.len())
    }
}

/// Acceptance threshold: (1 − δ) minus two binomial standard errors.
pub fn coverage_threshold(delta: f64, trials: usize) -> f64 {
    let p = 1.0 - delta;
    p - 2.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Runs `trials` independent simulations (trial t uses seed `seed + t`) and
/// reports how often the measured error is within min(1, bound). Trials run
/// in parallel; results do not depend on the thread count.
pub fn monte_carlo_coverage(
    scenario: &CoverageScenario,
    kind: BoundKind,
    trials: usize,
    seed: u64,
) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(MedixError::invalid("trials", "must be ≥ 1"));
    }
    let bound = scenario.bound(kind)?;
    let limit = bound.clipped();
    let records = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let world = simulate_gradient_world(&GradientWorldSpec {
                mu_in: vec![0.0; scenario.d],
                sigma: scenario.sigma,
                separation: scenario.separation,
                pi: scenario.pi,
                m: scenario.m,
                tail: scenario.tail,
                seed: seed.wrapping_add(trial as u64),
            })?;
            let result = medix_filter_gradients(&world.gradients, &vec![0.0; scenario.d], &scenario.filter)?;
            let rates = err_rates_from_origin(&result, &world.origin);
            let err_in = rates.err_in.unwrap_or(0.0);
            let err_out = rates.err_out.unwrap_or(0.0);
            let measured = if kind == BoundKind::Outlier { err_out } else { err_in };
            Ok(TrialRecord { trial, err_in, err_out, bound: bound.value, within: measured <= limit })
        })
        .collect::<Result<Vec<_>>>()?;
    let coverage = records.iter().filter(|r| r.within).count() as f64 / trials as f64;
    Ok(CoverageReport { kind, bound, trials: records, coverage })
}
