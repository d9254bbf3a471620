//! Experiment harness for natural type selection.
//!
//! An experiment is one TOML document ([`config`]). [`run_experiment`]
//! dispatches on its kind, writes CSV tables and a JSON summary into the run
//! directory, and finishes with a `manifest.json` listing every file. All
//! randomness comes from the seeds in the document, so rerunning a document
//! reproduces every file except the manifest's start time.

pub mod config;
pub mod error;
pub mod explore;
pub mod nts_run;
pub mod output;
pub mod plot;
pub mod rdf;
pub mod stats;
pub mod sweep;

pub use config::{parse_config, ExperimentConfig, ExperimentKind, KindParams};
pub use error::LabError;
pub use output::{Artifacts, RunManifest};

use std::path::Path;
use std::time::SystemTime;

/// Computes an experiment's artifacts without touching the filesystem.
pub fn compute(config: &ExperimentConfig, plot_script: bool) -> Result<Artifacts, LabError> {
    let mut artifacts = match config.kind {
        ExperimentKind::RdfPoint | ExperimentKind::RdfCurve => rdf::run_rdf(config)?,
        ExperimentKind::NtsRun => nts_run::run_nts(config)?,
        ExperimentKind::RedundancySweep => sweep::run_redundancy_sweep(config)?,
        ExperimentKind::ExploreCompare => explore::run_explore_compare(config)?,
    };
    if plot_script {
        artifacts.push(output::PLOT_SCRIPT_FILE, plot::script(config.kind).into_bytes());
    }
    Ok(artifacts)
}

/// Runs `config` into `out_root/<config.output>`. Files are written even
/// when a solver flag turns the run into an error.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_root: &Path,
    plot_script: bool,
) -> Result<(RunManifest, Vec<String>), LabError> {
    let started = SystemTime::now();
    let mut artifacts = compute(config, plot_script)?;
    let dir = output::resolve_run_dir(out_root, config);
    let manifest = output::write_artifacts(&dir, &artifacts, RunManifest::new(config, started))?;
    match artifacts.deferred.take() {
        Some(e) => Err(e),
        None => Ok((manifest, artifacts.summary)),
    }
}
