//! Closed-form misclassification bounds for the median filter and their
//! Monte-Carlo coverage checks.
//!
//! All bounds are returned unclipped; values above 1 carry `vacuous = true`.

mod coverage;

pub use coverage::{
    coverage_threshold, monte_carlo_coverage, BoundKind, CoverageReport, CoverageScenario, TrialRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{MedixError, Result};
use crate::stats::GradientMatrix;
use crate::synth::split_counts;

/// Inputs shared by the bound calculators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Sub-Gaussian proxy σ of each InD gradient coordinate.
    pub sigma: f64,
    /// Sub-Gaussian proxy σ_out of the OOD coordinates.
    pub sigma_out: f64,
    /// Fourth central moment bound μ₄ (heavy-tail bound only).
    pub mu4: f64,
    /// Contamination proportion π.
    pub pi: f64,
    /// Wild-set size m.
    pub m: usize,
    /// Gradient dimension d.
    pub d: usize,
    /// Failure probability δ.
    pub delta: f64,
    /// Separation Δ: ‖μ_out − ∇̄_in‖₂ ≥ Δ√d.
    pub separation: f64,
    /// Deviation tolerance ε of the bounds (not the filter's eps_stop).
    pub eps_dev: f64,
}

impl BoundInputs {
    /// (m_in, m_out) after the same integer rounding used to build wild sets.
    pub fn counts(&self) -> Result<(usize, usize)> {
        split_counts(self.pi, self.m)
    }

    pub fn m_in(&self) -> Result<usize> {
        Ok(self.counts()?.0)
    }

    pub fn m_out(&self) -> Result<usize> {
        Ok(self.counts()?.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub vacuous: bool,
}

impl BoundValue {
    fn new(value: f64) -> Self {
        BoundValue { value, vacuous: value > 1.0 }
    }

    /// min(1, value): the bound as a probability.
    pub fn clipped(&self) -> f64 {
        self.value.min(1.0)
    }
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(MedixError::invalid(name, format!("must lie in (0, 1), got {v}")))
    }
}

fn check_counts(inputs: &BoundInputs) -> Result<(usize, usize)> {
    check_open_unit("pi", inputs.pi)?;
    check_open_unit("delta", inputs.delta)?;
    let (m_in, m_out) = inputs.counts()?;
    if m_in == 0 || m_out == 0 {
        return Err(MedixError::invalid("m", format!("need m_in ≥ 1 and m_out ≥ 1, got {m_in} / {m_out}")));
    }
    Ok((m_in, m_out))
}

/// ε = σ·√(2 ln(2 d m_in)), the tolerance at which 2d·exp(−ε²/2σ²) = 1/m_in.
pub fn default_epsilon(sigma: f64, d: usize, m_in: usize) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(MedixError::invalid("sigma", "must be finite and non-negative"));
    }
    if d == 0 || m_in == 0 {
        return Err(MedixError::invalid("d·m_in", "must be ≥ 1"));
    }
    Ok(sigma * (2.0 * (2.0 * d as f64 * m_in as f64).ln()).sqrt())
}

/// π / (2(1 − π)).
pub fn contamination_term(pi: f64) -> f64 {
    pi / (2.0 * (1.0 - pi))
}

/// (1 − π) / (2π).
pub fn reverse_contamination_term(pi: f64) -> f64 {
    (1.0 - pi) / (2.0 * pi)
}

fn hoeffding(delta: f64, n: usize) -> f64 {
    ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// η = 2d·exp(−ε²/(2σ²)) + √(ln(1/δ)/(2 m_in)), the fraction of inliers that
/// may fall outside the ε-ball.
pub fn eta(inputs: &BoundInputs) -> Result<f64> {
    let (m_in, _) = check_counts(inputs)?;
    if !(inputs.sigma > 0.0) {
        return Err(MedixError::invalid("sigma", "must be positive"));
    }
    let tail = 2.0 * inputs.d as f64 * (-inputs.eps_dev.powi(2) / (2.0 * inputs.sigma.powi(2))).exp();
    Ok(tail + hoeffding(inputs.delta, m_in))
}

/// Inlier misclassification bound, statement form:
/// 1/m_in + 2√(ln(1/δ)/(2 m_in)) + π/(2(1−π)).
pub fn inlier_bound(inputs: &BoundInputs) -> Result<BoundValue> {
    let (m_in, _) = check_counts(inputs)?;
    Ok(BoundValue::new(1.0 / m_in as f64 + 2.0 * hoeffding(inputs.delta, m_in) + contamination_term(inputs.pi)))
}

/// Inlier bound in the form produced by the proof: 2η + π/(2(1−π)), with η
/// evaluated at `eps_dev`.
pub fn inlier_bound_proof_form(inputs: &BoundInputs) -> Result<BoundValue> {
    Ok(BoundValue::new(2.0 * eta(inputs)? + contamination_term(inputs.pi)))
}

/// Outlier misclassification bound:
/// 2d·exp(−(Δ−ε)²/(2σ_out²)) + √(ln(1/δ)/(2 m_out)) + (1−π)/(2π).
pub fn outlier_bound(inputs: &BoundInputs) -> Result<BoundValue> {
    let (_, m_out) = check_counts(inputs)?;
    if !(inputs.eps_dev > 0.0) {
        return Err(MedixError::invalid("eps_dev", "must be positive"));
    }
    if inputs.eps_dev >= inputs.separation {
        return Err(MedixError::SeparationViolated { eps_dev: inputs.eps_dev, separation: inputs.separation });
    }
    if !(inputs.sigma_out > 0.0) {
        return Err(MedixError::invalid("sigma_out", "must be positive"));
    }
    let gap = inputs.separation - inputs.eps_dev;
    let tail = 2.0 * inputs.d as f64 * (-gap * gap / (2.0 * inputs.sigma_out.powi(2))).exp();
    Ok(BoundValue::new(tail + hoeffding(inputs.delta, m_out) + reverse_contamination_term(inputs.pi)))
}

/// (μ₄ − σ⁴) / (d(ε² − σ²)²), the Chebyshev-type tail term of the
/// finite-fourth-moment bound.
pub fn heavy_tail_moment_term(inputs: &BoundInputs) -> Result<f64> {
    let s2 = inputs.sigma * inputs.sigma;
    if !(inputs.sigma > 0.0) {
        return Err(MedixError::invalid("sigma", "must be positive"));
    }
    if inputs.eps_dev <= inputs.sigma {
        return Err(MedixError::ToleranceBelowNoise { eps_dev: inputs.eps_dev, sigma: inputs.sigma });
    }
    if inputs.mu4 < s2 * s2 {
        return Err(MedixError::invalid("mu4", "must be ≥ sigma⁴"));
    }
    if inputs.d == 0 {
        return Err(MedixError::invalid("d", "must be ≥ 1"));
    }
    let gap = inputs.eps_dev * inputs.eps_dev - s2;
    Ok((inputs.mu4 - s2 * s2) / (inputs.d as f64 * gap * gap))
}

/// Inlier bound without sub-Gaussianity:
/// 2·((μ₄−σ⁴)/(d(ε²−σ²)²) + √(ln(1/δ)/(2 m_in))) + π/(2(1−π)).
pub fn inlier_bound_heavy_tail(inputs: &BoundInputs) -> Result<BoundValue> {
    let (m_in, _) = check_counts(inputs)?;
    let moment = heavy_tail_moment_term(inputs)?;
    Ok(BoundValue::new(2.0 * (moment + hoeffding(inputs.delta, m_in)) + contamination_term(inputs.pi)))
}

/// Conservative σ estimate: the largest per-coordinate sample std.
pub fn estimate_sigma(g: &GradientMatrix) -> f64 {
    g.column_std().into_iter().fold(0.0, f64::max)
}

/// Contamination-robust σ estimate: the largest per-coordinate
/// 1.4826·MAD (median absolute deviation from the column median), which
/// matches the std for Gaussian columns and ignores a minority of outliers.
pub fn estimate_sigma_robust(g: &GradientMatrix) -> f64 {
    let median = |v: &mut Vec<f64>| {
        v.sort_unstable_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { crate::stats::mid(v[n / 2 - 1], v[n / 2]) }
    };
    (0..g.cols())
        .map(|j| {
            let mut col = g.column(j);
            let med = median(&mut col);
            let mut dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
            1.4826 * median(&mut dev)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> BoundInputs {
        BoundInputs {
            sigma: 1.0,
            sigma_out: 1.0,
            mu4: 3.0,
            pi: 0.5,
            m: 10_000,
            d: 10,
            delta: 0.1,
            separation: 6.0,
            eps_dev: 1.0,
        }
    }

    #[test]
    fn default_epsilon_examples() {
        assert!((default_epsilon(1.0, 1, 1).unwrap() - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
        assert_eq!(default_epsilon(0.0, 5, 5).unwrap(), 0.0);
        assert_eq!(default_epsilon(2.0, 3, 7).unwrap(), 2.0 * default_epsilon(1.0, 3, 7).unwrap());
        assert!(default_epsilon(-1.0, 1, 1).is_err());
        assert!(default_epsilon(1.0, 0, 1).is_err());
    }

    #[test]
    fn contamination_terms_at_half() {
        assert_eq!(contamination_term(0.5), 0.5);
        assert_eq!(reverse_contamination_term(0.5), 0.5);
        assert_eq!(contamination_term(0.0), 0.0);
    }

    #[test]
    fn argument_errors() {
        let mut b = base();
        b.pi = 1.0;
        assert!(inlier_bound(&b).is_err());
        let mut b = base();
        b.eps_dev = 6.0;
        assert!(matches!(outlier_bound(&b), Err(MedixError::SeparationViolated { .. })));
        let mut b = base();
        b.eps_dev = 0.5;
        assert!(matches!(inlier_bound_heavy_tail(&b), Err(MedixError::ToleranceBelowNoise { .. })));
    }

    #[test]
    fn vacuous_flag() {
        let mut b = base();
        b.pi = 0.1;
        let v = outlier_bound(&b).unwrap();
        assert!(v.vacuous && v.value > 1.0);
        assert_eq!(v.clipped(), 1.0);
        assert!(!inlier_bound(&b).unwrap().vacuous);
    }

    #[test]
    fn sigma_estimate_is_max_column_std() {
        let g = GradientMatrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [4.0, 1.0]]).unwrap();
        assert_eq!(estimate_sigma(&g), 2.0);
        // MAD ignores the single far point in column 0
        let h = GradientMatrix::from_rows(&[[0.0], [1.0], [2.0], [100.0]]).unwrap();
        assert!((estimate_sigma_robust(&h) - 1.4826).abs() < 1e-12);
    }
}
