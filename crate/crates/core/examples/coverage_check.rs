//! Monte-Carlo check that the bounds hold with probability ≥ 1 − δ.
//!
//! cargo run --release --example coverage_check

use medix::bounds::{coverage_threshold, monte_carlo_coverage, BoundKind, CoverageScenario};
use medix::synth::Tail;

fn main() -> medix::Result<()> {
    let trials = 100;
    for (kind, tail, eps_dev) in [
        (BoundKind::Inlier, Tail::Gaussian, None),
        (BoundKind::Outlier, Tail::Gaussian, None),
        (BoundKind::InlierHeavyTail, Tail::StudentT(8.0), Some(2.0)),
    ] {
        let scenario = CoverageScenario { tail, eps_dev, ..CoverageScenario::gaussian(1.0, 10.0, 0.45, 500, 10, 0.1) };
        let report = monte_carlo_coverage(&scenario, kind, trials, 42)?;
        let mean_err_in = report.trials.iter().map(|t| t.err_in).sum::<f64>() / trials as f64;
        println!(
            "{kind:<18} bound {:.4} coverage {:.3} (threshold {:.3}) mean ERR_in {mean_err_in:.4}",
            report.bound.value,
            report.coverage,
            coverage_threshold(0.1, trials)
        );
    }
    Ok(())
}
