use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fedcref::data::{build_federation, catalog, generate_synthetic, load_idx, DataError, LabeledDataset};
use fedcref::nn::write_checkpoint;
use fedcref::protocol::{run_fedcref_observed, IterationRecord, ProtocolError, Termination};
use fedcref::{FederationSystem, IterationMetrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate, write_aggregate, Aggregate};
use crate::config::{ConfigError, DatasetSpec, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dataset: {0}")]
    Data(#[from] DataError),
    #[error("seed {seed}: {source}")]
    Protocol {
        seed: u64,
        #[source]
        source: ProtocolError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn format_err(path: &Path, detail: impl ToString) -> CliError {
    CliError::Format {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub communities_found: usize,
    pub isolated: usize,
    pub active: usize,
    pub wrong_assoc_pct: f64,
    pub mean_acc: f64,
    pub min_acc: f64,
    pub max_acc: f64,
}

impl From<&IterationMetrics> for MetricsRow {
    fn from(m: &IterationMetrics) -> Self {
        MetricsRow {
            iteration: m.iteration,
            communities_found: m.communities_found,
            isolated: m.isolated_count,
            active: m.active_count,
            wrong_assoc_pct: m.wrong_assoc_pct,
            mean_acc: m.mean_acc,
            min_acc: m.min_acc(),
            max_acc: m.max_acc(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationInfo {
    pub clients: usize,
    pub total_clusters: usize,
    pub mean_k: f64,
    pub classes: usize,
}

/// Non-reproducible facts about a run. Everything else in a summary is a
/// pure function of the configuration and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub wall_time_secs: f64,
    pub output_dir: String,
    pub version: String,
}

/// `summary.json` of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub federation: FederationInfo,
    pub termination: Termination,
    pub iterations: usize,
    pub initial: IterationMetrics,
    #[serde(rename = "final")]
    pub final_metrics: IterationMetrics,
    pub metadata: RunMetadata,
}

/// Summary and per-iteration rows of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub summary: RunSummary,
    pub rows: Vec<MetricsRow>,
}

/// Outcome of a whole experiment.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<SeedRun>,
    pub aggregate: Aggregate,
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Loads the dataset once for file-backed specs; synthetic worlds are
/// generated per seed.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Option<LabeledDataset>, CliError> {
    match spec {
        DatasetSpec::Synthetic { .. } => Ok(None),
        DatasetSpec::Idx {
            images,
            labels,
            min_class_count,
        } => Ok(Some(load_idx(images, labels, *min_class_count)?)),
        DatasetSpec::Named { name, data_dir } => {
            let entry = catalog::lookup(name).ok_or_else(|| ConfigError::Invalid {
                field: "dataset",
                detail: format!("unknown dataset {name:?}"),
            })?;
            let dir = data_dir.clone().or_else(catalog::data_dir_from_env).ok_or_else(|| {
                ConfigError::Invalid {
                    field: "data_dir",
                    detail: format!(
                        "dataset {name} needs a data directory; set data_dir or {}",
                        catalog::DATA_DIR_ENV
                    ),
                }
            })?;
            Ok(Some(entry.load(&dir)?))
        }
    }
}

/// Builds the dirty federation of one seed.
pub fn build_system(
    cfg: &ExperimentConfig,
    loaded: Option<&LabeledDataset>,
    seed: u64,
) -> Result<FederationSystem, CliError> {
    let generated;
    let ds = match (&cfg.dataset, loaded) {
        (
            DatasetSpec::Synthetic {
                classes,
                dim,
                per_class,
                separation,
            },
            _,
        ) => {
            generated = generate_synthetic(*classes, *dim, *per_class, *separation, seed)?;
            &generated
        }
        (_, Some(ds)) => ds,
        (_, None) => {
            return Err(ConfigError::Invalid {
                field: "dataset",
                detail: "dataset was not loaded".into(),
            }
            .into())
        }
    };
    let mut system = build_federation(ds, cfg.n_clients, cfg.samples_per_cluster, cfg.overlap, seed)?;
    system.apply_dirtiness(cfg.dirtiness, seed)?;
    Ok(system)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| format_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Runs one seed and writes its directory.
pub fn run_seed(
    cfg: &ExperimentConfig,
    loaded: Option<&LabeledDataset>,
    seed: u64,
) -> Result<SeedRun, CliError> {
    let started = Instant::now();
    let dir = seed_dir(&cfg.out, seed);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let graphs_dir = dir.join("graphs");
    if cfg.dump_graphs {
        fs::create_dir_all(&graphs_dir).map_err(io_err(&graphs_dir))?;
    }

    let system = build_system(cfg, loaded, seed)?;
    let federation = FederationInfo {
        clients: system.clients.len(),
        total_clusters: system.total_clusters(),
        mean_k: system.mean_k(),
        classes: system.class_set.len(),
    };

    let mut traces = Vec::new();
    let mut graph_error = None;
    let observe = |record: &IterationRecord| {
        traces.push(record.trace());
        if cfg.dump_graphs && graph_error.is_none() {
            let path = graphs_dir.join(format!("iter_{:03}.txt", record.metrics.iteration));
            if let Err(e) = fs::write(&path, record.graph.to_edge_list()) {
                graph_error = Some(io_err(&path)(e));
            }
        }
    };
    let result = run_fedcref_observed(system, &cfg.protocol, seed, observe)
        .map_err(|source| CliError::Protocol { seed, source })?;
    if let Some(e) = graph_error {
        return Err(e);
    }

    let rows: Vec<MetricsRow> = result.records.iter().map(|r| MetricsRow::from(&r.metrics)).collect();
    write_csv(&dir.join("metrics.csv"), &rows)?;
    let trace_path = dir.join("trace.jsonl");
    let mut lines = String::new();
    for t in &traces {
        lines.push_str(&serde_json::to_string(t).map_err(|e| format_err(&trace_path, e))?);
        lines.push('\n');
    }
    fs::write(&trace_path, lines).map_err(io_err(&trace_path))?;

    if cfg.save_models {
        save_models(&dir.join("models"), &result.final_state)?;
    }

    let summary = RunSummary {
        seed,
        config: cfg.clone(),
        federation,
        termination: result.termination,
        iterations: result.last().iteration,
        initial: result.initial().clone(),
        final_metrics: result.last().clone(),
        metadata: RunMetadata {
            wall_time_secs: started.elapsed().as_secs_f64(),
            output_dir: dir.display().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(SeedRun { summary, rows })
}

fn save_models(dir: &Path, state: &fedcref::protocol::ProtocolState) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let save = |name: String, model: &fedcref::Model| -> Result<(), CliError> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        write_checkpoint(model, BufWriter::new(file)).map_err(|e| format_err(&path, e))
    };
    for (client, models) in state.local_models.iter().enumerate() {
        for (cluster, model) in models.iter().enumerate() {
            save(format!("local_c{client:03}_q{cluster}.fcrf"), model)?;
        }
    }
    let mut members = String::new();
    for (p, group) in state.group_models.iter().enumerate() {
        save(format!("group_{p:03}.fcrf"), &group.model)?;
        let ids: Vec<String> = group.members.iter().map(|m| m.to_string()).collect();
        members.push_str(&format!("group_{p:03} {}\n", ids.join(" ")));
    }
    let path = dir.join("groups.txt");
    fs::write(&path, members).map_err(io_err(&path))
}

/// Runs every seed (in parallel), then writes the cross-seed aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let loaded = load_dataset(&cfg.dataset)?;
    let runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, loaded.as_ref(), seed))
        .collect::<Result<_, _>>()?;
    let aggregate = aggregate(&runs);
    write_aggregate(&cfg.out, &aggregate)?;
    Ok(ExperimentReport { runs, aggregate })
}

/// Writes the federation snapshot of every seed without running the protocol.
pub fn generate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let loaded = load_dataset(&cfg.dataset)?;
    cfg.seeds
        .iter()
        .map(|&seed| {
            let system = build_system(cfg, loaded.as_ref(), seed)?;
            let path = cfg.out.join(format!("federation-seed-{seed}.json"));
            system.write_snapshot(&path)?;
            Ok(path)
        })
        .collect()
}
