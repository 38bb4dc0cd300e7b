//! End-to-end experiment runners behind the `medix` binary.
//!
//! Every runner takes a [`RunConfig`] (a flat TOML key-value file with CLI
//! overrides applied on top) plus an output directory, and writes CSV files
//! and SVG plots that are byte-identical for identical (config, seed). The
//! `run_*` functions return in-memory results; the `cmd_*` wrappers also
//! write artifacts and a printable summary.

mod compare;
mod config;
mod files;
mod hyper;
mod synth2d;
mod sweep;

pub use compare::{cmd_ewm_vs_gm, run_ewm_vs_gm, CompareRow};
pub use config::RunConfig;
pub use files::{cmd_bounds, cmd_filter, cmd_metrics, read_scores};
pub use hyper::{cmd_hyper_sweep, run_hyper_sweep, HyperRow};
pub use synth2d::{classifier_world, cmd_synth2d, run_synth2d, ClassifierWorld, Synth2dRun};
pub use sweep::{cmd_sweep, run_sweep, spearman};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::MedixError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MEDIX_OUT_DIR";

/// Failure of an experiment run, split by exit code.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Bad or missing configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// A pipeline stage failed on valid configuration (exit code 3).
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: MedixError,
    },
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Stage { .. } => 3,
        }
    }
}

pub type ExpResult<T> = std::result::Result<T, ExperimentError>;

/// Attaches a stage name to library errors. Errors that stem from user
/// parameters (out-of-range values, pools too small for the request) are
/// reported as configuration errors instead.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> ExpResult<T>;
}

impl<T> StageExt<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> ExpResult<T> {
        self.map_err(|e| match e {
            MedixError::InvalidParameter { .. }
            | MedixError::SeparationViolated { .. }
            | MedixError::ToleranceBelowNoise { .. }
            | MedixError::FourthMomentUnbounded(_)
            | MedixError::InsufficientPool { .. }
            | MedixError::StepExceedsPool { .. }
            | MedixError::WildSetTooSmall { .. } => ExperimentError::Config(format!("{stage}: {e}")),
            source => ExperimentError::Stage { stage, source },
        })
    }
}

/// Output of a `cmd_*` run: the files written and a human-readable summary.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Output directory precedence: explicit value, then `$MEDIX_OUT_DIR`,
/// then `./medix_out`.
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("medix_out"))
}

pub(crate) fn ensure_dir(dir: &Path) -> ExpResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Stage { stage: "output", source: MedixError::io(dir, e) })
}

pub(crate) fn write_text(dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> ExpResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| ExperimentError::Stage { stage: "output", source: MedixError::io(&path, e) })?;
    files.push(path);
    Ok(())
}

/// Formats an optional value as a CSV cell (empty when absent).
pub(crate) fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
