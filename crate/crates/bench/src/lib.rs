//! Shared fixtures for the pipeline benchmarks.

use belltag_core::{run_experiment, ExperimentConfig, RunOutput};

/// A short default-configuration run reused across benchmarks.
pub fn short_run(duration: f64) -> RunOutput {
    let config = ExperimentConfig {
        duration,
        ..ExperimentConfig::default()
    };
    run_experiment(&config).expect("benchmark fixture run")
}
