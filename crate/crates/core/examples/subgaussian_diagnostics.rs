//! Histogram and normal Q-Q pairs for one coordinate of the InD per-sample
//! gradients, to eyeball the sub-Gaussian assumption.
//!
//! cargo run --release --example subgaussian_diagnostics

use medix::gradients::{gradient_matrix, subgaussian_diagnostics, train_ind_classifier, GradientLayout, TrainConfig};
use medix::synth::{gaussian_world, MixtureSpec};

fn main() -> medix::Result<()> {
    let world = gaussian_world(&MixtureSpec::three_gaussians())?;
    let model = train_ind_classifier(&world.train, &TrainConfig::default())?;
    let g = gradient_matrix(&model, world.train.features(), world.train.labels(), GradientLayout { include_bias: true })?;
    let report = subgaussian_diagnostics(&g, 0, 15)?;
    let h = &report.histogram;
    let peak = *h.counts.iter().max().unwrap_or(&1) as f64;
    for (i, c) in h.counts.iter().enumerate() {
        println!("[{:>8.4}, {:>8.4}) {:>4} {}", h.edges[i], h.edges[i + 1], c, "#".repeat((40.0 * *c as f64 / peak) as usize));
    }
    match &report.qq_pairs {
        Ok(pairs) => {
            let step = (pairs.len() / 8).max(1);
            println!("Q-Q (theoretical, sample):");
            for (t, s) in pairs.iter().step_by(step) {
                println!("  {t:>7.3} {s:>10.5}");
            }
        }
        Err(e) => println!("Q-Q unavailable: {e}"),
    }
    Ok(())
}
