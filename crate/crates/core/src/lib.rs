//! Unsupervised federated clustering.
//!
//! Clients hold unlabeled data split into local clusters. Each client trains
//! one dense autoencoder per cluster, clusters are associated across clients
//! by comparing reconstruction errors, associated groups train a federated
//! model, and clients refine their local partitions with the federated models
//! until the system is stable.
//!
//! Module map:
//!
//! * [`nn`]: dense autoencoders, backprop, Adam, FedAvg, checkpoints.
//! * [`data`]: IDX ingestion, synthetic data, federation generation.
//! * [`protocol`]: the iterative association and refinement loop.
//! * [`metrics`]: ground-truth evaluation (Hungarian ACC, wrong associations).

pub mod data;
pub mod metrics;
pub mod nn;
pub mod protocol;
pub mod seed;

pub use data::{ClientState, FederationSystem, GroundTruth, LabeledDataset};
pub use metrics::IterationMetrics;
pub use nn::Model;
pub use protocol::{ClusterId, ProtocolConfig, RunResult, ThresholdConfig};
