//! Configuration-driven experiment runner for `sfpe-core`.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod experiments;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use compare::{compare, CompareReport};
pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{Check, Report, RunOutcome};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] sfpe_core::SfpeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(sfpe_core::SfpeError::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}

/// `--out` first, then the configured directory, then `runs/<experiment>-seed<seed>`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", cfg.experiment.name(), cfg.seed)))
}

/// Runs one experiment and writes its artifacts under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome, RunError> {
    let dir = artifacts::ArtifactDir::create(out)?;
    experiments::execute(cfg, &dir)
}
