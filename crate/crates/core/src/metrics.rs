//! Evaluation against hidden ground truth.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{ClientState, GroundTruth};
use crate::protocol::{AssociationGraph, ClusterId};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("cost matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("cost matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty label vectors")]
    Empty,
}

/// Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns the column chosen for each row.
pub fn hungarian(cost: &Array2<f64>) -> Result<Vec<usize>, MetricsError> {
    let (rows, cols) = cost.dim();
    if rows != cols {
        return Err(MetricsError::NotSquare { rows, cols });
    }
    if let Some(((row, col), _)) = cost.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(MetricsError::NonFinite { row, col });
    }
    let n = rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based rows/columns; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

fn dense_labels(labels: &[impl Copy + Ord]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

/// Unsupervised clustering accuracy: the fraction of samples on which the
/// two labelings agree under the best one-to-one relabeling.
pub fn acc<A, B>(predicted: &[A], reference: &[B]) -> Result<f64, MetricsError>
where
    A: Copy + Ord,
    B: Copy + Ord,
{
    if predicted.len() != reference.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), reference.len()));
    }
    if predicted.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (p, kp) = dense_labels(predicted);
    let (r, kr) = dense_labels(reference);
    let k = kp.max(kr);
    let mut counts = Array2::<f64>::zeros((k, k));
    for (&a, &b) in p.iter().zip(&r) {
        counts[[a, b]] += 1.0;
    }
    let assignment = hungarian(&counts.mapv(|c| -c))?;
    let matched: f64 = assignment.iter().enumerate().map(|(i, &j)| counts[[i, j]]).sum();
    Ok(matched / predicted.len() as f64)
}

/// Most frequent value; ties go to the smallest.
fn plurality(values: impl IntoIterator<Item = u32>) -> Option<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut best: Option<(u32, usize)> = None;
    for (v, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

/// Plurality ground-truth label of every cluster (`None` for empty clusters).
pub fn cluster_true_labels(
    clients: &[ClientState],
    truth: &GroundTruth,
) -> BTreeMap<ClusterId, Option<u32>> {
    let mut out = BTreeMap::new();
    for c in clients {
        let labels = truth.client(c.client_id);
        for q in 0..c.k_local {
            let members = c
                .assignment
                .iter()
                .zip(labels)
                .filter(|(&a, _)| a == q)
                .map(|(_, &l)| l);
            out.insert(ClusterId::new(c.client_id, q), plurality(members));
        }
    }
    out
}

/// Percentage of community members whose label differs from their
/// community's plurality label. Zero when there are no communities.
pub fn wrong_associations(
    graph: &AssociationGraph,
    cluster_labels: &BTreeMap<ClusterId, Option<u32>>,
) -> f64 {
    let mut members = 0usize;
    let mut wrong = 0usize;
    for community in graph.communities() {
        let labels: Vec<Option<u32>> = community.iter().map(|c| cluster_labels[c]).collect();
        let group_label = plurality(labels.iter().flatten().copied());
        members += labels.len();
        wrong += labels.iter().filter(|&&l| l.is_none() || l != group_label).count();
    }
    if members == 0 {
        0.0
    } else {
        100.0 * wrong as f64 / members as f64
    }
}

/// Metrics recorded after each protocol iteration (iteration 0 is the start).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub communities_found: usize,
    pub isolated_count: usize,
    pub wrong_assoc_pct: f64,
    pub mean_acc: f64,
    pub acc_per_client: Vec<f64>,
    pub active_count: usize,
}

impl IterationMetrics {
    pub fn min_acc(&self) -> f64 {
        self.acc_per_client.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_acc(&self) -> f64 {
        self.acc_per_client.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// ACC of every client's current assignment against its hidden labels.
pub fn client_accuracies(clients: &[ClientState], truth: &GroundTruth) -> Vec<f64> {
    clients
        .iter()
        .map(|c| acc(&c.assignment, truth.client(c.client_id)).unwrap_or(0.0))
        .collect()
}

/// Assembles the metrics of one iteration.
///
/// `cluster_labels` must describe the clusters as they were when `graph` was
/// built; `clients` hold the assignments after refinement.
pub fn collect(
    iteration: usize,
    graph: &AssociationGraph,
    cluster_labels: &BTreeMap<ClusterId, Option<u32>>,
    clients: &[ClientState],
    truth: &GroundTruth,
) -> IterationMetrics {
    let acc_per_client = client_accuracies(clients, truth);
    let mean_acc = acc_per_client.iter().sum::<f64>() / acc_per_client.len().max(1) as f64;
    IterationMetrics {
        iteration,
        communities_found: graph.communities().len(),
        isolated_count: graph.isolated().len(),
        wrong_assoc_pct: wrong_associations(graph, cluster_labels),
        mean_acc,
        acc_per_client,
        active_count: clients.iter().filter(|c| c.active).count(),
    }
}
