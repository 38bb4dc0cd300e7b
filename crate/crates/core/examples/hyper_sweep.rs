//! Sensitivity of the 2-D pipeline to the stop threshold and batch size.
//!
//! cargo run --release --example hyper_sweep

use medix::experiments::{run_hyper_sweep, RunConfig};

fn main() {
    let cfg = RunConfig { hyper_eps: vec![5e-3, 5e-2], hyper_k: vec![30, 60], ..RunConfig::default() };
    for r in run_hyper_sweep(&cfg).expect("sweep runs") {
        println!(
            "eps {:<6} k {:<3} flagged {:>4} ERR_in {:?} ERR_out {:?} FPR95 {:?}",
            r.eps_stop, r.k, r.n_flagged, r.err_in, r.err_out, r.fpr95
        );
    }
}
