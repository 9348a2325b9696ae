use ndarray::ArrayView2;
use rayon::prelude::*;

use super::{ClusterId, ProtocolError};
use crate::nn::{fedavg, init_model, train_local, Model, TrainConfig};
use crate::seed;

/// Seed fingerprint of a community: its sorted member list.
pub fn group_fingerprint(base_seed: u64, members: &[ClusterId]) -> u64 {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let ids: Vec<u64> = sorted
        .iter()
        .flat_map(|c| [c.client as u64, c.cluster as u64])
        .collect();
    seed::derive(base_seed, "group", &ids)
}

/// FedAvg training of one community model.
///
/// `members` pairs each member cluster with its samples and must be sorted
/// by cluster id. The model starts from a fresh initialization seeded by
/// `init_seed`. Each round, every member trains a copy of the current model
/// for `round_cfg.epochs` epochs on its own samples (shuffle seeded by
/// `(shuffle_seed, round)`), and the copies are averaged with weights equal
/// to member sample counts.
pub fn train_group_federated(
    members: &[(ClusterId, ArrayView2<'_, f64>)],
    encoder_sizes: &[usize],
    rounds: usize,
    round_cfg: &TrainConfig,
    init_seed: u64,
    shuffle_seed: u64,
) -> Result<Model, ProtocolError> {
    if members.len() < 2 {
        return Err(ProtocolError::Contract(format!(
            "federated group needs at least 2 clusters, got {}",
            members.len()
        )));
    }
    if members.iter().any(|(_, x)| x.nrows() == 0) {
        return Err(ProtocolError::Contract("federated group member without samples".into()));
    }
    let mut global = init_model(encoder_sizes, init_seed)?;
    let weights: Vec<f64> = members.iter().map(|(_, x)| x.nrows() as f64).collect();
    for round in 0..rounds {
        let round_seed = seed::derive(shuffle_seed, "round", &[round as u64]);
        let locals: Vec<Model> = members
            .par_iter()
            .map(|(_, x)| train_local(&global, *x, round_cfg, round_seed))
            .collect::<Result<_, _>>()?;
        let refs: Vec<&Model> = locals.iter().collect();
        global = fedavg(&refs, &weights)?;
    }
    Ok(global)
}
