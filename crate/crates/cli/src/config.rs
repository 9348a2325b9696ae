use std::path::{Path, PathBuf};

use clap::Args;
use fedcref::data::catalog;
use fedcref::nn::{AdamConfig, TrainConfig};
use fedcref::protocol::ProtocolConfig;
use fedcref::ThresholdConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("{field} = {value} is out of range; expected {range}")]
    Range {
        field: &'static str,
        value: String,
        range: &'static str,
    },
    #[error("{field}: {detail}")]
    Invalid { field: &'static str, detail: String },
    #[error("unknown preset {0:?}; run `fedcref presets` for the catalog")]
    UnknownPreset(String),
}

/// One layer of settings. Every key is optional; layers stack as defaults,
/// then preset, then config file, then command-line flags.
///
/// The same struct is the TOML schema and the flag set, so every file key
/// has a matching `--kebab-case` flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// `emnist`, `kmnist`, `kmnist49`, `idx` or `synthetic`.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Image file for `dataset = "idx"`.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Label file for `dataset = "idx"`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Drop classes with fewer samples (`idx` datasets).
    #[arg(long)]
    pub min_class_count: Option<usize>,
    /// Directory holding the named IDX datasets; defaults to $FEDCREF_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub synthetic_classes: Option<usize>,
    #[arg(long)]
    pub synthetic_dim: Option<usize>,
    /// Samples generated per class; defaults to n_clients * samples_per_cluster.
    #[arg(long)]
    pub synthetic_per_class: Option<usize>,
    #[arg(long)]
    pub synthetic_separation: Option<f64>,

    #[arg(long)]
    pub n_clients: Option<usize>,
    #[arg(long)]
    pub samples_per_cluster: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub dirtiness: Option<f64>,

    #[arg(long)]
    pub theta: Option<f64>,
    /// Percentile as a fraction, e.g. 0.75.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub fl_rounds: Option<usize>,
    #[arg(long)]
    pub global_stop_window: Option<usize>,
    #[arg(long)]
    pub global_stop_rel_change: Option<f64>,
    #[arg(long)]
    pub local_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Local epochs per federated round.
    #[arg(long)]
    pub round_epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Encoder widths after the input, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden_layers: Option<Vec<usize>>,
    #[arg(long)]
    pub max_iterations: Option<usize>,

    #[arg(long, alias = "seed", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dump_graphs: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub save_models: Option<bool>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident, $($f:ident),* $(,)?) => {
        ConfigLayer { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ConfigLayer {
    /// Values of `top` win over `self`.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        let base = self;
        overlay_fields!(
            base, top, dataset, images, labels, min_class_count, data_dir, synthetic_classes,
            synthetic_dim, synthetic_per_class, synthetic_separation, n_clients,
            samples_per_cluster, overlap, dirtiness, theta, alpha, tau, fl_rounds,
            global_stop_window, global_stop_rel_change, local_epochs, batch_size, round_epochs,
            learning_rate, hidden_layers, max_iterations, seeds, out, dump_graphs, save_models,
            threads,
        )
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<ConfigLayer, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            detail: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<ConfigLayer, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }
}

/// Where samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic {
        classes: usize,
        dim: usize,
        per_class: usize,
        separation: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        min_class_count: usize,
    },
    Named {
        name: String,
        #[serde(skip)]
        data_dir: Option<PathBuf>,
    },
}

/// A fully resolved, validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub n_clients: usize,
    pub samples_per_cluster: usize,
    pub overlap: f64,
    pub dirtiness: f64,
    pub protocol: ProtocolConfig,
    pub seeds: Vec<u64>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub dump_graphs: bool,
    #[serde(skip)]
    pub save_models: bool,
    #[serde(skip)]
    pub threads: usize,
}

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn check(field: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), ConfigError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Range {
            field,
            value: value.to_string(),
            range,
        })
    }
}

fn at_least(field: &'static str, value: usize, min: usize, range: &'static str) -> Result<(), ConfigError> {
    if value >= min {
        Ok(())
    } else {
        Err(ConfigError::Range {
            field,
            value: value.to_string(),
            range,
        })
    }
}

impl ExperimentConfig {
    /// Applies defaults to every absent key and validates ranges.
    pub fn resolve(layer: ConfigLayer) -> Result<ExperimentConfig, ConfigError> {
        let t = ThresholdConfig::default();
        let p = ProtocolConfig::default();
        let n_clients = layer.n_clients.unwrap_or(25);
        let samples_per_cluster = layer.samples_per_cluster.unwrap_or(500);
        let overlap = layer.overlap.unwrap_or(0.0);
        let dirtiness = layer.dirtiness.unwrap_or(0.3);
        let thresholds = ThresholdConfig {
            theta: layer.theta.unwrap_or(t.theta),
            alpha: layer.alpha.unwrap_or(t.alpha),
            tau: layer.tau.unwrap_or(t.tau),
            fl_rounds: layer.fl_rounds.unwrap_or(t.fl_rounds),
            global_stop_window: layer.global_stop_window.unwrap_or(t.global_stop_window),
            global_stop_rel_change: layer.global_stop_rel_change.unwrap_or(t.global_stop_rel_change),
        };
        let adam = AdamConfig {
            lr: layer.learning_rate.unwrap_or(AdamConfig::DEFAULT.lr),
            ..AdamConfig::DEFAULT
        };
        let batch_size = layer.batch_size.unwrap_or(p.local_train.batch_size);
        let protocol = ProtocolConfig {
            thresholds,
            hidden_layers: layer.hidden_layers.clone().unwrap_or(p.hidden_layers),
            local_train: TrainConfig {
                epochs: layer.local_epochs.unwrap_or(p.local_train.epochs),
                batch_size,
                adam,
            },
            federated_round: TrainConfig {
                epochs: layer.round_epochs.unwrap_or(p.federated_round.epochs),
                batch_size,
                adam,
            },
            max_iterations: layer.max_iterations.unwrap_or(p.max_iterations),
        };

        check("theta", thresholds.theta, thresholds.theta > 0.0 && thresholds.theta <= 1.0, "(0, 1]")?;
        check("alpha", thresholds.alpha, thresholds.alpha > 0.0 && thresholds.alpha <= 1.0, "(0, 1]")?;
        check("tau", thresholds.tau, (0.8..=1.0).contains(&thresholds.tau), "[0.8, 1]")?;
        check(
            "global_stop_rel_change",
            thresholds.global_stop_rel_change,
            thresholds.global_stop_rel_change >= 0.0,
            "[0, inf)",
        )?;
        check("overlap", overlap, (0.0..=1.0).contains(&overlap), "[0, 1]")?;
        check("dirtiness", dirtiness, (0.0..=1.0).contains(&dirtiness), "[0, 1]")?;
        check("learning_rate", adam.lr, adam.lr > 0.0, "(0, inf)")?;
        at_least("n_clients", n_clients, 2, ">= 2")?;
        at_least("samples_per_cluster", samples_per_cluster, 1, ">= 1")?;
        at_least("fl_rounds", thresholds.fl_rounds, 1, ">= 1")?;
        at_least("global_stop_window", thresholds.global_stop_window, 2, ">= 2")?;
        at_least("local_epochs", protocol.local_train.epochs, 1, ">= 1")?;
        at_least("round_epochs", protocol.federated_round.epochs, 1, ">= 1")?;
        at_least("batch_size", batch_size, 1, ">= 1")?;
        at_least("max_iterations", protocol.max_iterations, 1, ">= 1")?;
        if protocol.hidden_layers.is_empty() || protocol.hidden_layers.contains(&0) {
            return Err(ConfigError::Range {
                field: "hidden_layers",
                value: format!("{:?}", protocol.hidden_layers),
                range: "non-empty list of positive widths",
            });
        }

        let dataset = Self::dataset_spec(&layer, n_clients, samples_per_cluster)?;
        let seeds = layer.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(ConfigError::Invalid {
                field: "seeds",
                detail: "at least one seed is required".into(),
            });
        }
        Ok(ExperimentConfig {
            dataset,
            n_clients,
            samples_per_cluster,
            overlap,
            dirtiness,
            protocol,
            seeds,
            out: layer.out.clone().unwrap_or_else(|| PathBuf::from("runs")),
            dump_graphs: layer.dump_graphs.unwrap_or(false),
            save_models: layer.save_models.unwrap_or(false),
            threads: layer.threads.unwrap_or(0),
        })
    }

    fn dataset_spec(
        layer: &ConfigLayer,
        n_clients: usize,
        samples_per_cluster: usize,
    ) -> Result<DatasetSpec, ConfigError> {
        let name = layer.dataset.as_deref().unwrap_or("emnist");
        match name {
            "synthetic" => {
                let spec = DatasetSpec::Synthetic {
                    classes: layer.synthetic_classes.unwrap_or(5),
                    dim: layer.synthetic_dim.unwrap_or(16),
                    per_class: layer
                        .synthetic_per_class
                        .unwrap_or(n_clients * samples_per_cluster),
                    separation: layer.synthetic_separation.unwrap_or(0.5),
                };
                if let DatasetSpec::Synthetic {
                    classes,
                    dim,
                    separation,
                    ..
                } = spec
                {
                    at_least("synthetic_classes", classes, 4, ">= 4")?;
                    at_least("synthetic_dim", dim, 2, ">= 2")?;
                    check("synthetic_separation", separation, separation > 0.0, "(0, inf)")?;
                }
                Ok(spec)
            }
            "idx" => match (&layer.images, &layer.labels) {
                (Some(images), Some(labels)) => Ok(DatasetSpec::Idx {
                    images: images.clone(),
                    labels: labels.clone(),
                    min_class_count: layer.min_class_count.unwrap_or(0),
                }),
                _ => Err(ConfigError::Invalid {
                    field: "dataset",
                    detail: "\"idx\" needs both images and labels".into(),
                }),
            },
            other => match catalog::lookup(other) {
                Some(entry) => Ok(DatasetSpec::Named {
                    name: entry.name.to_string(),
                    data_dir: layer.data_dir.clone(),
                }),
                None => Err(ConfigError::Invalid {
                    field: "dataset",
                    detail: format!("unknown dataset {other:?}; expected emnist, kmnist, kmnist49, idx or synthetic"),
                }),
            },
        }
    }
}
