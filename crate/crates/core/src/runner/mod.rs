//! Experiment orchestration: configuration, scenario environments, the
//! execution loop, and file emission.

pub mod config;
pub mod env;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{
    BenchmarkToggles, ConfigError, ExperimentConfig, PolicyKind, StartState, TopologyConfig,
};
pub use env::{CacheEnv, CacheReplay, SyntheticEnv, TransformedReplay, UtilityTransform};
pub use output::{emit_outputs, prepare_out_dir};
pub use presets::{preset_names, randomize_instance, topology_preset};
pub use run::{execute, BenchmarkSet, ReplayHandle, RunArtifacts, RunError, RunMetrics};

use std::path::Path;

/// Runs an experiment end to end: validates the output directory first,
/// executes the slot loop, solves the toggled benchmarks, and emits files.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<RunArtifacts, RunError> {
    if let Some(dir) = out_dir {
        prepare_out_dir(dir)?;
    }
    let artifacts = execute(config)?;
    if let Some(dir) = out_dir {
        emit_outputs(&artifacts, dir)?;
    }
    Ok(artifacts)
}
