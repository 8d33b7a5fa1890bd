//! Config loading and command-line overrides.

use std::path::Path;

use anyhow::{Context, Result};
use belltag_core::ExperimentConfig;

use crate::ConfigArgs;

pub fn load(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => read_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(model) = &args.model {
        config.model = model.parse()?;
    }
    if let Some(duration) = args.duration {
        config.duration = duration;
    }
    config.validate()?;
    Ok(config)
}

pub fn read_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: ExperimentConfig =
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    Ok(config)
}
