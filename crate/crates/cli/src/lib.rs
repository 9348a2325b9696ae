//! Experiment harness: configuration, presets, seeded runs and artifacts.
//!
//! A run directory holds one `seed-<n>/` per seed with `metrics.csv`,
//! `trace.jsonl`, `summary.json` and optionally `graphs/` and `models/`,
//! plus `aggregate.json`, `aggregate.csv` and `aggregate_iterations.csv`.

pub mod aggregate;
pub mod config;
pub mod experiment;
pub mod presets;

pub use aggregate::{aggregate, aggregate_dir, Aggregate, Stat};
pub use config::{ConfigError, ConfigLayer, DatasetSpec, ExperimentConfig};
pub use experiment::{run_experiment, run_seed, CliError, ExperimentReport, MetricsRow, RunSummary, SeedRun};

use std::path::Path;

/// Stacks defaults, an optional preset, an optional file and flag values.
pub fn resolve_config(
    preset: Option<&str>,
    file: Option<&Path>,
    flags: ConfigLayer,
) -> Result<ExperimentConfig, ConfigError> {
    let mut layer = ConfigLayer::default();
    if let Some(name) = preset {
        let p = presets::find(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        layer = layer.overlay(p.layer);
    }
    if let Some(path) = file {
        layer = layer.overlay(ConfigLayer::from_file(path)?);
    }
    ExperimentConfig::resolve(layer.overlay(flags))
}
