use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::Context;
use eyedas_core::{PipelineConfig, TrainConfig};
use serde::Deserialize;

use crate::args::{GlobalArgs, GridArgs};

/// Command-line misuse that clap cannot express, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: eyedas_core::Error) -> UsageError {
    UsageError(e.to_string())
}

/// Settings shared by every command: file defaults first, then flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
}

impl CliConfig {
    pub fn load(global: &GlobalArgs) -> anyhow::Result<Self> {
        let mut cfg = match &global.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        if let Some(seed) = global.seed {
            cfg.train.rng_seed = seed;
        }
        cfg.pipeline.validate().map_err(usage)?;
        cfg.train.validate().map_err(usage)?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply_grid(&mut self, grid: &GridArgs) -> anyhow::Result<()> {
        if let Some(n) = &grid.grid_estimators {
            self.train.n_estimators_grid = n.clone();
        }
        if let Some(d) = &grid.grid_depths {
            self.train.max_depth_grid = d.clone();
        }
        if let Some(k) = grid.cv_folds {
            self.train.cv_folds = k;
        }
        self.train.validate().map_err(usage)?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.train.rng_seed
    }
}
