use ndarray::Array2;
use rayon::prelude::*;

use super::{ClusterId, ProtocolError, ThresholdConfig};
use crate::data::ClientState;
use crate::nn::{ErrorVector, Model};

/// Min-max scaling to `[0, 1]`. A constant input maps to all zeros.
pub fn normalize_unit(values: &[f64]) -> Vec<f64> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - min) / range).collect()
}

/// One direction of the association test on a single cluster's samples.
///
/// Passes iff at least a fraction `alpha` of the normalized absolute error
/// differences is `<= theta`.
pub fn directional_pass(
    own_errors: &ErrorVector,
    foreign_errors: &ErrorVector,
    theta: f64,
    alpha: f64,
) -> Result<bool, ProtocolError> {
    if own_errors.len() != foreign_errors.len() {
        return Err(ProtocolError::Alignment {
            own: own_errors.len(),
            foreign: foreign_errors.len(),
        });
    }
    if own_errors.is_empty() {
        return Ok(false);
    }
    let diffs: Vec<f64> = own_errors
        .as_slice()
        .iter()
        .zip(foreign_errors.as_slice())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(percentile_pass(&normalize_unit(&diffs), theta, alpha))
}

/// True iff at least a fraction `alpha` of `normalized` is `<= theta`.
pub fn percentile_pass(normalized: &[f64], theta: f64, alpha: f64) -> bool {
    if normalized.is_empty() {
        return false;
    }
    let within = normalized.iter().filter(|&&d| d <= theta).count();
    within as f64 >= alpha * normalized.len() as f64
}

/// Directional pass matrix: `pass[v][u]` is true when cluster `u`'s model
/// reconstructs cluster `v`'s samples about as well as `v`'s own model.
///
/// Only pairs from distinct clients are evaluated; others stay false. Empty
/// clusters never pass.
pub fn directional_matrix(
    clients: &[ClientState],
    models: &[Vec<Model>],
    cfg: &ThresholdConfig,
) -> Result<(Vec<ClusterId>, Vec<Vec<bool>>), ProtocolError> {
    let ids = all_cluster_ids(clients);
    for id in &ids {
        if models.get(id.client).and_then(|m| m.get(id.cluster)).is_none() {
            return Err(ProtocolError::MissingModel(*id));
        }
    }
    let rows: Vec<Result<Vec<bool>, ProtocolError>> = ids
        .par_iter()
        .map(|&v| {
            let client = &clients[v.client];
            let samples: Array2<f64> = client.cluster_samples(v.cluster);
            let mut row = vec![false; ids.len()];
            if samples.nrows() == 0 {
                return Ok(row);
            }
            let own = models[v.client][v.cluster].reconstruction_errors(samples.view())?;
            for (col, u) in ids.iter().enumerate() {
                if u.client == v.client {
                    continue;
                }
                let foreign = models[u.client][u.cluster].reconstruction_errors(samples.view())?;
                row[col] = directional_pass(&own, &foreign, cfg.theta, cfg.alpha)?;
            }
            Ok(row)
        })
        .collect();
    let pass = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok((ids, pass))
}

/// Every `(client, cluster)` pair, sorted.
pub fn all_cluster_ids(clients: &[ClientState]) -> Vec<ClusterId> {
    clients
        .iter()
        .flat_map(|c| (0..c.k_local).map(move |q| ClusterId::new(c.client_id, q)))
        .collect()
}

/// Mutual associations: an undirected edge for every cross-client cluster
/// pair that passes in both directions. Edges come out as `(smaller, larger)`.
pub fn associate_clusters(
    clients: &[ClientState],
    models: &[Vec<Model>],
    cfg: &ThresholdConfig,
) -> Result<Vec<(ClusterId, ClusterId)>, ProtocolError> {
    let (ids, pass) = directional_matrix(clients, models, cfg)?;
    Ok(mutual_edges(&ids, &pass))
}

pub(crate) fn mutual_edges(ids: &[ClusterId], pass: &[Vec<bool>]) -> Vec<(ClusterId, ClusterId)> {
    let mut edges = Vec::new();
    for a in 0..ids.len() {
        for b in (a + 1)..ids.len() {
            if ids[a].client != ids[b].client && pass[a][b] && pass[b][a] {
                edges.push((ids[a], ids[b]));
            }
        }
    }
    edges
}
