//! Monte Carlo experiment harness: configuration, seeding, the parallel
//! replication driver and file formats.

pub mod config;
pub mod dataset;
pub mod output;
pub mod presets;
pub mod runner;
pub mod seeds;

use std::path::{Path, PathBuf};

pub use config::{EstimatorConfig, ExperimentConfig, GeneratorSection, NoiseMode, ThetaSpec};
pub use runner::{execute, run_replication, ExperimentResults, RunOptions};

use crate::error::Result;

/// Run `cfg` and write its result files into `out` (or `cfg.output_dir`).
/// Returns the directory written to.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    opts: &RunOptions,
) -> Result<PathBuf> {
    let results = execute(cfg, opts)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.clone());
    output::write_outputs(&results, &dir)?;
    Ok(dir)
}
