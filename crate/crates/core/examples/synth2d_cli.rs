//! Drive the same code as `medix synth2d` from a TOML config string and
//! write its CSV/SVG artifacts.
//!
//! cargo run --release --example synth2d_cli [out_dir]

use medix::experiments::{cmd_synth2d, RunConfig};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("medix_synth2d").display().to_string());
    let cfg = RunConfig::from_toml_str("seed = 2\npi = 0.5\nstop_rule = \"iteration\"\neps_scale = 0.05\n").expect("valid config");
    match cmd_synth2d(&cfg, out.as_ref()) {
        Ok(art) => {
            println!("{}", art.summary);
            art.files.iter().for_each(|f| println!("wrote {}", f.display()));
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
