//! Evaluate the misclassification bounds at a few settings, including
//! where they become vacuous.
//!
//! cargo run --example bound_calculator

use medix::bounds::{
    default_epsilon, eta, inlier_bound, inlier_bound_heavy_tail, inlier_bound_proof_form, outlier_bound, BoundInputs,
};

fn main() -> medix::Result<()> {
    println!("{:>5} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "pi", "m", "eps", "inlier", "proof", "outlier", "heavy");
    for (pi, m) in [(0.05, 10_000), (0.2, 10_000), (0.5, 10_000), (0.2, 200)] {
        let mut inputs = BoundInputs {
            sigma: 1.0,
            sigma_out: 1.0,
            mu4: 3.0,
            pi,
            m,
            d: 10,
            delta: 0.1,
            separation: 10.0,
            eps_dev: 0.0,
        };
        inputs.eps_dev = default_epsilon(inputs.sigma, inputs.d, inputs.m_in()?)?;
        let show = |b: medix::bounds::BoundValue| format!("{:.4}{}", b.value, if b.vacuous { "*" } else { " " });
        println!(
            "{pi:>5} {m:>6} {:>8.4} {:>8} {:>8} {:>8} {:>8}",
            inputs.eps_dev,
            show(inlier_bound(&inputs)?),
            show(inlier_bound_proof_form(&inputs)?),
            show(outlier_bound(&inputs)?),
            show(inlier_bound_heavy_tail(&inputs)?),
        );
        println!("      η = {:.4}", eta(&inputs)?);
    }
    println!("* = vacuous (bound exceeds 1)");
    Ok(())
}
