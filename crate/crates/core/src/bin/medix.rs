use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use medix::experiments::{
    cmd_bounds, cmd_ewm_vs_gm, cmd_filter, cmd_hyper_sweep, cmd_metrics, cmd_sweep, cmd_synth2d, resolve_out_dir,
    Artifacts, ExpResult, ExperimentError, RunConfig,
};

/// Median-centric OOD filtering: experiments and tools.
#[derive(Parser, Debug)]
#[command(name = "medix", version, about)]
struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $MEDIX_OUT_DIR, else ./medix_out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML key-value config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// 2-D three-Gaussian world: filter the wild set, train the detector, plot.
    Synth2d(Synth2dArgs),
    /// EWM deviation from the InD mean as OOD gradients are injected.
    Sweep(SweepArgs),
    /// Bound calculator with optional Monte-Carlo coverage.
    Bounds(BoundsArgs),
    /// Filter with element-wise vs geometric median across contamination levels.
    EwmVsGm(CompareArgs),
    /// Grid over eps_stop × k on the 2-D world.
    HyperSweep(HyperArgs),
    /// Filter a raw gradient file against a reference gradient.
    Filter(FilterArgs),
    /// FPR@TPR and AUROC from two score files.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug, Default)]
struct FilterFlags {
    /// Stop threshold; default eps_scale × σ̂.
    #[arg(long)]
    eps_stop: Option<f64>,
    /// Removal batch size; default max(1, m/20).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `iteration` or `loo`.
    #[arg(long)]
    stop_rule: Option<String>,
    /// `ewm`, `ewm_naive` or `gm`.
    #[arg(long)]
    aggregator: Option<String>,
}

#[derive(Args, Debug)]
struct Synth2dArgs {
    /// Wild-set contamination; unset keeps both pools whole.
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    n_ood: Option<usize>,
    /// `squared_error` or `cross_entropy`.
    #[arg(long)]
    loss: Option<String>,
    /// Confidence pre-filter threshold.
    #[arg(long)]
    prefilter: Option<f64>,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    n_in: Option<usize>,
    /// Comma-separated OOD counts, non-decreasing.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma_out: Option<f64>,
    #[arg(long)]
    mu4: Option<f64>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    eps_dev: Option<f64>,
    /// `gaussian` or `student_t:<nu>`.
    #[arg(long)]
    tail: Option<String>,
    /// Monte-Carlo trials per bound (0 = table only).
    #[arg(long)]
    coverage_trials: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Comma-separated OOD counts.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    ind_per_class: Option<usize>,
}

#[derive(Args, Debug)]
struct HyperArgs {
    /// Comma-separated eps_stop grid.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Comma-separated batch sizes (default m/40, m/20, m/10, m/5).
    #[arg(long = "k", value_delimiter = ',')]
    k: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// Gradient matrix (CSV with header g0.. or MDXG binary).
    #[arg(long)]
    gradients: Option<PathBuf>,
    /// One-row reference gradient file, same formats.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// CSV with a `score` column for InD samples.
    #[arg(long)]
    scores_in: Option<PathBuf>,
    /// CSV with a `score` column for OOD samples.
    #[arg(long)]
    scores_out: Option<PathBuf>,
    #[arg(long)]
    tpr: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_filter(cfg: &mut RunConfig, f: FilterFlags) {
    set_opt(&mut cfg.eps_stop, f.eps_stop);
    set_opt(&mut cfg.k, f.k);
    set(&mut cfg.max_iter, f.max_iter);
    set(&mut cfg.stop_rule, f.stop_rule);
    set(&mut cfg.aggregator, f.aggregator);
}

fn run(cli: Cli) -> ExpResult<Artifacts> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set_opt(&mut cfg.out, cli.out);
    let out = resolve_out_dir(cfg.out.as_deref());
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Synth2d(a) => {
            set_opt(&mut cfg.pi, a.pi);
            set(&mut cfg.n_per_class, a.n_per_class);
            set(&mut cfg.n_ood, a.n_ood);
            set(&mut cfg.loss, a.loss);
            set_opt(&mut cfg.prefilter, a.prefilter);
            apply_filter(&mut cfg, a.filter);
            cmd_synth2d(&cfg, &out)
        }
        Command::Sweep(a) => {
            set(&mut cfg.sweep_dim, a.dim);
            set(&mut cfg.sweep_sigma, a.sigma);
            set(&mut cfg.sweep_separation, a.separation);
            set(&mut cfg.sweep_n_in, a.n_in);
            set(&mut cfg.sweep_steps, a.steps);
            cmd_sweep(&cfg, &out)
        }
        Command::Bounds(a) => {
            set(&mut cfg.sigma, a.sigma);
            set_opt(&mut cfg.sigma_out, a.sigma_out);
            set_opt(&mut cfg.mu4, a.mu4);
            set(&mut cfg.bound_pi, a.pi);
            set(&mut cfg.m, a.m);
            set(&mut cfg.dim, a.dim);
            set(&mut cfg.delta, a.delta);
            set(&mut cfg.separation, a.separation);
            set_opt(&mut cfg.eps_dev, a.eps_dev);
            set(&mut cfg.tail, a.tail);
            set(&mut cfg.coverage_trials, a.coverage_trials);
            cmd_bounds(&cfg, &out)
        }
        Command::EwmVsGm(a) => {
            set(&mut cfg.cmp_levels, a.levels);
            set(&mut cfg.cmp_seeds, a.seeds);
            set(&mut cfg.cmp_ind_per_class, a.ind_per_class);
            cmd_ewm_vs_gm(&cfg, &out)
        }
        Command::HyperSweep(a) => {
            set(&mut cfg.hyper_eps, a.eps);
            set(&mut cfg.hyper_k, a.k);
            cmd_hyper_sweep(&cfg, &out)
        }
        Command::Filter(a) => {
            set_opt(&mut cfg.gradients, a.gradients);
            set_opt(&mut cfg.reference, a.reference);
            apply_filter(&mut cfg, a.filter);
            cmd_filter(&cfg, &out)
        }
        Command::Metrics(a) => {
            set_opt(&mut cfg.scores_in, a.scores_in);
            set_opt(&mut cfg.scores_out, a.scores_out);
            set(&mut cfg.tpr, a.tpr);
            cmd_metrics(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(art) => {
            // a closed pipe (`medix ... | head`) is not a failure of the run
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", art.summary);
            for f in &art.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("medix: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
