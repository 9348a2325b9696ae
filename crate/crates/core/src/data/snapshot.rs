//! JSON snapshots of a generated federation.
//!
//! A snapshot stores, per client, the row indices into the source dataset and
//! the current cluster assignment, plus the generation config. Samples and
//! labels are re-read from the dataset on import, so the same dataset (same
//! loader settings) must be supplied.
//!
//! ```json
//! {
//!   "format": "fedcref-federation",
//!   "version": 1,
//!   "config": { "n_clients": 25, "samples_per_cluster": 500, "overlap": 0.0,
//!               "dirtiness": 0.3, "seed": 1 },
//!   "class_set": [0, 1, 2],
//!   "clients": [ { "client_id": 0, "k_local": 2, "classes": [4, 1],
//!                  "sample_indices": [...], "assignment": [...] } ]
//! }
//! ```

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::{ClientState, DataError, FederationConfig, FederationSystem, GroundTruth, LabeledDataset};

pub const SNAPSHOT_FORMAT: &str = "fedcref-federation";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSnapshot {
    pub client_id: usize,
    pub k_local: usize,
    pub classes: Vec<u32>,
    pub sample_indices: Vec<usize>,
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationSnapshot {
    pub format: String,
    pub version: u32,
    pub config: FederationConfig,
    pub class_set: Vec<u32>,
    pub clients: Vec<ClientSnapshot>,
}

impl FederationSystem {
    pub fn to_snapshot(&self) -> FederationSnapshot {
        FederationSnapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            config: self.config,
            class_set: self.class_set.clone(),
            clients: self
                .clients
                .iter()
                .map(|c| ClientSnapshot {
                    client_id: c.client_id,
                    k_local: c.k_local,
                    classes: self.client_classes[c.client_id].clone(),
                    sample_indices: self.sample_indices[c.client_id].clone(),
                    assignment: c.assignment.clone(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &FederationSnapshot, ds: &LabeledDataset) -> Result<Self, DataError> {
        let bad = |msg: String| Err(DataError::Snapshot(msg));
        if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
            return bad(format!("unsupported format {} v{}", snap.format, snap.version));
        }
        let mut clients = Vec::with_capacity(snap.clients.len());
        let mut truth = Vec::with_capacity(snap.clients.len());
        for (pos, c) in snap.clients.iter().enumerate() {
            if c.client_id != pos {
                return bad(format!("client at position {pos} has id {}", c.client_id));
            }
            if c.assignment.len() != c.sample_indices.len() {
                return bad(format!("client {pos}: assignment and sample counts differ"));
            }
            if c.k_local < 1 || c.assignment.iter().any(|&a| a >= c.k_local) {
                return bad(format!("client {pos}: assignment outside 0..{}", c.k_local));
            }
            if let Some(&i) = c.sample_indices.iter().find(|&&i| i >= ds.len()) {
                return bad(format!("client {pos}: sample index {i} beyond dataset of {}", ds.len()));
            }
            clients.push(ClientState {
                client_id: pos,
                samples: ds.samples().select(Axis(0), &c.sample_indices),
                assignment: c.assignment.clone(),
                k_local: c.k_local,
                active: true,
            });
            truth.push(c.sample_indices.iter().map(|&i| ds.labels()[i]).collect());
        }
        Ok(FederationSystem {
            clients,
            truth: GroundTruth::new(truth),
            sample_indices: snap.clients.iter().map(|c| c.sample_indices.clone()).collect(),
            client_classes: snap.clients.iter().map(|c| c.classes.clone()).collect(),
            config: snap.config,
            class_set: snap.class_set.clone(),
        })
    }

    pub fn write_snapshot(&self, path: &std::path::Path) -> Result<(), DataError> {
        let text = serde_json::to_string(&self.to_snapshot())
            .map_err(|e| DataError::Snapshot(e.to_string()))?;
        std::fs::write(path, text).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_snapshot(path: &std::path::Path, ds: &LabeledDataset) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let snap: FederationSnapshot =
            serde_json::from_str(&text).map_err(|e| DataError::Snapshot(e.to_string()))?;
        Self::from_snapshot(&snap, ds)
    }
}
