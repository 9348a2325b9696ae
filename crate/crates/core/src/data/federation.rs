use std::collections::BTreeMap;

use ndarray::Axis;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{ClientState, DataError, FederationConfig, FederationSystem, GroundTruth, LabeledDataset};
use crate::seed;

/// Number of samples every client holding a class shares with the others.
pub(crate) fn shared_count(overlap: f64, samples_per_cluster: usize) -> usize {
    // Guard against 0.3 * 500 landing a hair under 150.
    ((overlap * samples_per_cluster as f64) + 1e-9).floor() as usize
}

/// Generates `n_clients` clients from a labeled dataset.
///
/// Each client draws `K_i` uniformly from `{2, ..., |U| / 2}`, then `K_i`
/// distinct classes, then `samples_per_cluster` samples per class. Of those,
/// `floor(overlap * S)` come from a per-class shared pool that every holder of
/// the class includes; the rest are private and never reused. The initial
/// assignment is class-pure: cluster `q` holds the `q`-th drawn class.
pub fn build_federation(
    ds: &LabeledDataset,
    n_clients: usize,
    samples_per_cluster: usize,
    overlap: f64,
    seed: u64,
) -> Result<FederationSystem, DataError> {
    if n_clients < 2 {
        return Err(DataError::InvalidParameter {
            name: "n_clients",
            detail: format!("{n_clients} < 2"),
        });
    }
    if samples_per_cluster == 0 {
        return Err(DataError::InvalidParameter {
            name: "samples_per_cluster",
            detail: "must be >= 1".into(),
        });
    }
    if !(0.0..=1.0).contains(&overlap) {
        return Err(DataError::InvalidParameter {
            name: "overlap",
            detail: format!("{overlap} outside [0, 1]"),
        });
    }
    let classes = ds.class_set().to_vec();
    let k_max = classes.len() / 2;
    if k_max < 2 {
        return Err(DataError::InvalidParameter {
            name: "dataset",
            detail: format!("{} classes; at least 4 are needed", classes.len()),
        });
    }

    let mut rng = seed::rng(seed::derive(seed, "federation", &[]));
    let mut pools: BTreeMap<u32, Vec<usize>> = classes.iter().map(|&c| (c, Vec::new())).collect();
    for (i, &l) in ds.labels().iter().enumerate() {
        pools.get_mut(&l).expect("label in class set").push(i);
    }
    for pool in pools.values_mut() {
        pool.shuffle(&mut rng);
    }
    let shared = shared_count(overlap, samples_per_cluster);
    let private = samples_per_cluster - shared;
    let mut cursor: BTreeMap<u32, usize> = classes.iter().map(|&c| (c, shared)).collect();

    let mut clients = Vec::with_capacity(n_clients);
    let mut truth = Vec::with_capacity(n_clients);
    let mut sample_indices = Vec::with_capacity(n_clients);
    let mut client_classes = Vec::with_capacity(n_clients);
    for client_id in 0..n_clients {
        let k = rng.random_range(2..=k_max);
        let chosen: Vec<u32> = index::sample(&mut rng, classes.len(), k)
            .into_iter()
            .map(|i| classes[i])
            .collect();

        let mut rows: Vec<(usize, u32, usize)> = Vec::with_capacity(k * samples_per_cluster);
        for (q, &class) in chosen.iter().enumerate() {
            let pool = &pools[&class];
            let start = cursor[&class];
            if start + private > pool.len() {
                return Err(DataError::InsufficientSamples {
                    class,
                    needed: private,
                    available: pool.len().saturating_sub(start),
                });
            }
            rows.extend(pool[..shared].iter().map(|&i| (i, class, q)));
            rows.extend(pool[start..start + private].iter().map(|&i| (i, class, q)));
            cursor.insert(class, start + private);
        }
        rows.shuffle(&mut rng);

        let idx: Vec<usize> = rows.iter().map(|r| r.0).collect();
        clients.push(ClientState {
            client_id,
            samples: ds.samples().select(Axis(0), &idx),
            assignment: rows.iter().map(|r| r.2).collect(),
            k_local: k,
            active: true,
        });
        truth.push(rows.iter().map(|r| r.1).collect());
        sample_indices.push(idx);
        client_classes.push(chosen);
    }

    Ok(FederationSystem {
        clients,
        truth: GroundTruth::new(truth),
        sample_indices,
        client_classes,
        config: FederationConfig {
            n_clients,
            samples_per_cluster,
            overlap,
            dirtiness: 0.0,
            seed,
        },
        class_set: classes,
    })
}

/// Moves each sample, with probability `dirtiness`, to a uniformly chosen
/// different cluster in `0..k`.
pub fn dirty_assignment(assignment: &[usize], k: usize, dirtiness: f64, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    assignment
        .iter()
        .map(|&a| {
            if k > 1 && rng.random::<f64>() < dirtiness {
                let other = rng.random_range(0..k - 1);
                if other >= a {
                    other + 1
                } else {
                    other
                }
            } else {
                a
            }
        })
        .collect()
}

/// Simulated imperfect initial clustering of one client.
pub fn dirty_uniform_clustering(mut client: ClientState, dirtiness: f64, seed: u64) -> ClientState {
    client.assignment = dirty_assignment(&client.assignment, client.k_local, dirtiness, seed);
    client
}
