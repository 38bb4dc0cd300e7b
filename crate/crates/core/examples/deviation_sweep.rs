//! How far the element-wise median drifts from the InD mean gradient as
//! OOD gradients are mixed in, with the geometric median for comparison.
//!
//! cargo run --release --example deviation_sweep

use medix::experiments::spearman;
use medix::filter::{deviation_sweep, deviation_sweep_with, Aggregator};
use medix::synth::{gradient_pools, Tail};

fn main() -> medix::Result<()> {
    let pools = gradient_pools(&[0.0; 10], 1.0, 1.0, 500, 450, Tail::Gaussian, 0)?;
    let reference = pools.ind.column_means();
    let steps: Vec<usize> = (0..10).map(|i| 50 * i).collect();
    let ewm = deviation_sweep(&pools.ind, &pools.ood, &reference, &steps)?;
    let gm = deviation_sweep_with(&pools.ind, &pools.ood, &reference, &steps, Aggregator::geometric())?;
    println!("n_ood   ewm_dev   gm_dev");
    for (a, b) in ewm.iter().zip(&gm) {
        println!("{:>5}  {:>8.4} {:>8.4}", a.n_ood, a.deviation, b.deviation);
    }
    let x: Vec<f64> = ewm.iter().map(|p| p.n_ood as f64).collect();
    let y: Vec<f64> = ewm.iter().map(|p| p.deviation).collect();
    println!("spearman(n_ood, ewm deviation) = {:?}", spearman(&x, &y));
    Ok(())
}
