//! The federated cluster refinement loop.
//!
//! Each iteration:
//!
//! 1. active clients train one autoencoder per local cluster;
//! 2. every cluster is evaluated with every other client's cluster models and
//!    mutually passing pairs are associated;
//! 3. connected components with at least two clusters become communities and
//!    train a federated model each;
//! 4. active clients refine their partitions with their local models plus all
//!    federated models, and drop out of the active set once stable.
//!
//! The loop ends when no client is active, when community and isolated
//! counts have settled, or at the iteration cap.

mod association;
mod engine;
mod federated;
mod graph;
mod refine;

pub use association::{
    all_cluster_ids, associate_clusters, directional_matrix, directional_pass, normalize_unit,
    percentile_pass,
};
pub use engine::{
    check_global_stop, run_clients, run_fedcref, run_fedcref_observed, update_active_set, GroupModel,
    IterationRecord, Protocol, ProtocolState, RunResult, StepReport, Termination, TraceRecord,
};
pub use federated::{group_fingerprint, train_group_federated};
pub use graph::{build_graph, AssociationGraph, UnionFind};
pub use refine::{cluster_refine, refine_from_errors, Refinement};

use serde::{Deserialize, Serialize};

use crate::nn::{NnError, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("error vectors are not aligned: {own} own vs {foreign} foreign")]
    Alignment { own: usize, foreign: usize },
    #[error("no model for cluster {0}")]
    MissingModel(ClusterId),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("invalid config {field}: {detail}")]
    Config { field: &'static str, detail: String },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Cluster `cluster` of client `client`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterId {
    pub client: usize,
    pub cluster: usize,
}

impl ClusterId {
    pub fn new(client: usize, cluster: usize) -> Self {
        Self { client, cluster }
    }
}

impl std::fmt::Display for ClusterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.client, self.cluster)
    }
}

/// Association, stability and stopping thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Bound on normalized error differences.
    pub theta: f64,
    /// Required fraction of differences within `theta` (75th percentile = 0.75).
    pub alpha: f64,
    /// Iteration-over-iteration ACC at which a client counts as stable.
    pub tau: f64,
    pub fl_rounds: usize,
    pub global_stop_window: usize,
    pub global_stop_rel_change: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            theta: 0.2,
            alpha: 0.75,
            tau: 0.8,
            fl_rounds: 15,
            global_stop_window: 3,
            global_stop_rel_change: 0.10,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let range = |field: &'static str, v: f64, lo: f64, lo_open: bool, hi: f64| {
            let ok = if lo_open { v > lo } else { v >= lo } && v <= hi;
            if ok {
                Ok(())
            } else {
                let open = if lo_open { "(" } else { "[" };
                Err(ProtocolError::Config {
                    field,
                    detail: format!("{v} outside {open}{lo}, {hi}]"),
                })
            }
        };
        range("theta", self.theta, 0.0, true, 1.0)?;
        range("alpha", self.alpha, 0.0, true, 1.0)?;
        range("tau", self.tau, 0.8, false, 1.0)?;
        range("global_stop_rel_change", self.global_stop_rel_change, 0.0, false, f64::MAX)?;
        if self.fl_rounds == 0 {
            return Err(ProtocolError::Config {
                field: "fl_rounds",
                detail: "must be >= 1".into(),
            });
        }
        if self.global_stop_window < 2 {
            return Err(ProtocolError::Config {
                field: "global_stop_window",
                detail: "must be >= 2".into(),
            });
        }
        Ok(())
    }
}

/// Everything the protocol needs besides the clients and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub thresholds: ThresholdConfig,
    /// Encoder widths after the input layer; the decoder mirrors them.
    pub hidden_layers: Vec<usize>,
    pub local_train: TrainConfig,
    pub federated_round: TrainConfig,
    pub max_iterations: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            thresholds: ThresholdConfig::default(),
            hidden_layers: vec![100, 64, 32],
            local_train: TrainConfig::LOCAL,
            federated_round: TrainConfig::FEDERATED_ROUND,
            max_iterations: 30,
        }
    }
}

impl ProtocolConfig {
    pub fn encoder_sizes(&self, input_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim).chain(self.hidden_layers.iter().copied()).collect()
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.thresholds.validate()?;
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(ProtocolError::Config {
                field: "hidden_layers",
                detail: format!("{:?} must be non-empty positive widths", self.hidden_layers),
            });
        }
        for (field, t) in [("local_train", &self.local_train), ("federated_round", &self.federated_round)] {
            if t.epochs == 0 || t.batch_size == 0 {
                return Err(ProtocolError::Config {
                    field,
                    detail: "epochs and batch_size must be >= 1".into(),
                });
            }
        }
        if self.max_iterations == 0 {
            return Err(ProtocolError::Config {
                field: "max_iterations",
                detail: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}
