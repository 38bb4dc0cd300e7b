//! Filter with the element-wise vs the geometric median on the 2-D world
//! at several contamination levels.
//!
//! cargo run --release --example ewm_vs_gm

use medix::experiments::{run_ewm_vs_gm, RunConfig};

fn main() {
    let cfg = RunConfig { cmp_seeds: 2, cmp_levels: vec![15, 60, 120], ..RunConfig::default() };
    let rows = run_ewm_vs_gm(&cfg).expect("comparison runs");
    println!("seed n_ood ewm_removal gm_removal ewm_dev gm_dev");
    for r in rows {
        println!(
            "{:>4} {:>5} {:>11.3} {:>10.3} {:>7.4} {:>6.4}",
            r.seed, r.n_ood, r.ewm_removal, r.gm_removal, r.ewm_deviation, r.gm_deviation
        );
    }
}
