//! Run the greedy median filter directly on a simulated gradient matrix
//! and compare the aggregators.
//!
//! cargo run --release --example filter_gradients

use medix::bounds::CoverageScenario;
use medix::filter::{err_rates_from_origin, medix_filter_gradients, Aggregator, FilterConfig, StopRule};
use medix::synth::{simulate_gradient_world, GradientWorldSpec, Tail};

fn main() -> medix::Result<()> {
    let spec = GradientWorldSpec { mu_in: vec![0.0; 8], sigma: 1.0, separation: 3.0, pi: 0.2, m: 400, tail: Tail::Gaussian, seed: 1 };
    let world = simulate_gradient_world(&spec)?;
    let reference = vec![0.0; 8];

    let base = CoverageScenario::default_filter(spec.m, spec.sigma);
    // the loo rule compares single-sample shifts, so it wants a much smaller eps
    for (name, aggregator, stop_rule, eps_stop) in [
        ("ewm / iteration-drop", Aggregator::Ewm, StopRule::IterationDrop, base.eps_stop),
        ("ewm / loo-drop", Aggregator::Ewm, StopRule::LooDrop, 5e-3),
        ("geometric / iteration-drop", Aggregator::geometric(), StopRule::IterationDrop, base.eps_stop),
    ] {
        let cfg = FilterConfig { stop_rule, aggregator, eps_stop, ..base.clone() };
        let res = medix_filter_gradients(&world.gradients, &reference, &cfg)?;
        let rates = err_rates_from_origin(&res, &world.origin);
        println!(
            "{name:<28} flagged {:>3} in {:>2} iterations ({}), ERR_in {:.3}, ERR_out {:.3}",
            res.outlier_ids.len(),
            res.iterations(),
            res.stop_reason,
            rates.err_in.unwrap_or(0.0),
            rates.err_out.unwrap_or(0.0)
        );
    }
    Ok(())
}
