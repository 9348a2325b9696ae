//! Datasets and simulated federations.
//!
//! Ground-truth labels never live on [`ClientState`]; they sit in a separate
//! [`GroundTruth`] owned by the [`FederationSystem`] and are read only by
//! generation and evaluation code.

pub mod catalog;
mod federation;
mod idx;
mod snapshot;
mod synthetic;

pub use federation::{build_federation, dirty_assignment, dirty_uniform_clustering};
pub use idx::{load_idx, read_idx_images, read_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use snapshot::{ClientSnapshot, FederationSnapshot, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};
pub use synthetic::{generate_synthetic, SYNTHETIC_LOG_SCALE_STD, SYNTHETIC_NOISE_RATIO};

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{file}: bad {field}: {detail}")]
    Format {
        file: String,
        field: &'static str,
        detail: String,
    },
    #[error("class {class} has {available} unused samples, {needed} needed")]
    InsufficientSamples {
        class: u32,
        needed: usize,
        available: usize,
    },
    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Labeled samples in `[0, 1]^d`. Labels are only for generation and scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Array2<f64>,
    labels: Vec<u32>,
    class_set: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(samples: Array2<f64>, labels: Vec<u32>) -> Result<Self, DataError> {
        if samples.nrows() != labels.len() {
            return Err(DataError::InvalidParameter {
                name: "labels",
                detail: format!("{} labels for {} samples", labels.len(), samples.nrows()),
            });
        }
        if let Some(v) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::InvalidParameter {
                name: "samples",
                detail: format!("feature value {v} outside [0, 1]"),
            });
        }
        let class_set = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        Ok(Self {
            samples,
            labels,
            class_set,
        })
    }

    pub fn samples(&self) -> ArrayView2<'_, f64> {
        self.samples.view()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Distinct labels, ascending.
    pub fn class_set(&self) -> &[u32] {
        &self.class_set
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn class_count(&self, class: u32) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Drops every class with fewer than `min_count` samples.
    pub fn retain_classes_with_at_least(self, min_count: usize) -> Self {
        let keep: BTreeSet<u32> = self
            .class_set
            .iter()
            .copied()
            .filter(|&c| self.class_count(c) >= min_count)
            .collect();
        if keep.len() == self.class_set.len() {
            return self;
        }
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.labels[i])).collect();
        Self {
            samples: self.samples.select(Axis(0), &rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            class_set: keep.into_iter().collect(),
        }
    }
}

/// One simulated client. Carries no ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub client_id: usize,
    pub samples: Array2<f64>,
    /// Cluster index per sample, each `< k_local`.
    pub assignment: Vec<usize>,
    pub k_local: usize,
    pub active: bool,
}

impl ClientState {
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    /// Row indices currently assigned to `cluster`.
    pub fn cluster_rows(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cluster_samples(&self, cluster: usize) -> Array2<f64> {
        self.samples.select(Axis(0), &self.cluster_rows(cluster))
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_local];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn is_partition(&self) -> bool {
        self.assignment.len() == self.len() && self.assignment.iter().all(|&a| a < self.k_local)
    }
}

/// Hidden per-sample labels of every client, aligned with client sample rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    labels: Vec<Vec<u32>>,
}

impl GroundTruth {
    pub fn new(labels: Vec<Vec<u32>>) -> Self {
        Self { labels }
    }

    pub fn client(&self, client_id: usize) -> &[u32] {
        &self.labels[client_id]
    }

    pub fn num_clients(&self) -> usize {
        self.labels.len()
    }

    /// Applies `f` to every label, e.g. to relabel classes in taint tests.
    pub fn map_labels(&self, f: impl Fn(u32) -> u32) -> Self {
        Self {
            labels: self
                .labels
                .iter()
                .map(|l| l.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }
}

/// Generation parameters echoed into snapshots and summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub n_clients: usize,
    pub samples_per_cluster: usize,
    pub overlap: f64,
    pub dirtiness: f64,
    pub seed: u64,
}

/// The generated world: clients, their hidden labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationSystem {
    pub clients: Vec<ClientState>,
    truth: GroundTruth,
    /// Row indices into the source dataset, per client.
    sample_indices: Vec<Vec<usize>>,
    /// Classes each client was seeded with; cluster `q` started as class `q`.
    client_classes: Vec<Vec<u32>>,
    pub config: FederationConfig,
    pub class_set: Vec<u32>,
}

impl FederationSystem {
    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn sample_indices(&self, client_id: usize) -> &[usize] {
        &self.sample_indices[client_id]
    }

    pub fn client_classes(&self, client_id: usize) -> &[u32] {
        &self.client_classes[client_id]
    }

    pub fn total_clusters(&self) -> usize {
        self.clients.iter().map(|c| c.k_local).sum()
    }

    pub fn mean_k(&self) -> f64 {
        self.total_clusters() as f64 / self.clients.len() as f64
    }

    /// Corrupts every client's initial assignment; see [`dirty_uniform_clustering`].
    pub fn apply_dirtiness(&mut self, dirtiness: f64, seed: u64) -> Result<(), DataError> {
        if !(0.0..=1.0).contains(&dirtiness) {
            return Err(DataError::InvalidParameter {
                name: "dirtiness",
                detail: format!("{dirtiness} outside [0, 1]"),
            });
        }
        for client in &mut self.clients {
            let s = crate::seed::derive(seed, "dirtiness", &[client.client_id as u64]);
            client.assignment = dirty_assignment(&client.assignment, client.k_local, dirtiness, s);
        }
        self.config.dirtiness = dirtiness;
        Ok(())
    }

    /// Splits the system into what the protocol may see and the hidden labels.
    pub fn into_parts(self) -> (Vec<ClientState>, GroundTruth) {
        (self.clients, self.truth)
    }
}
