//! Write a gradient matrix as CSV and as the compact binary format, read
//! both back, and filter from the files.
//!
//! cargo run --example gradient_io

use medix::bounds::estimate_sigma_robust;
use medix::filter::{medix_filter_gradients, FilterConfig, Origin, StopRule};
use medix::stats::io::{read_any, write_binary, write_csv};
use medix::synth::{simulate_gradient_world, GradientWorldSpec, Tail};

fn main() -> medix::Result<()> {
    let dir = std::env::temp_dir().join("medix_gradient_io");
    std::fs::create_dir_all(&dir).map_err(|e| medix::MedixError::Io { path: dir.clone(), source: e })?;
    let world = simulate_gradient_world(&GradientWorldSpec {
        mu_in: vec![0.0; 8],
        sigma: 1.0,
        separation: 10.0,
        pi: 0.2,
        m: 400,
        tail: Tail::Gaussian,
        seed: 9,
    })?;
    let (csv, bin) = (dir.join("g.csv"), dir.join("g.mdxg"));
    write_csv(&world.gradients, &csv)?;
    write_binary(&world.gradients, &bin)?;
    let (a, b) = (read_any(&csv)?, read_any(&bin)?);
    println!("csv round trip exact: {}, binary round trip exact: {}", a == world.gradients, b == world.gradients);
    // the same defaults as `medix filter`: a MAD-based σ̂ is not inflated by the outliers
    let cfg = FilterConfig {
        eps_stop: 0.05 * estimate_sigma_robust(&b),
        stop_rule: StopRule::IterationDrop,
        ..FilterConfig::for_size(b.rows())
    };
    let res = medix_filter_gradients(&b, &[0.0; 8], &cfg)?;
    let hits = res.outlier_ids.iter().filter(|&&i| world.origin[i] == Origin::Ood).count();
    println!("flagged {} rows, {hits} of them OOD (of {} OOD in total)", res.outlier_ids.len(), world.origin.iter().filter(|&&o| o == Origin::Ood).count());
    println!("files in {}", dir.display());
    Ok(())
}
