mod oracles;

use fedcref::data::{build_federation, generate_synthetic};
use fedcref::nn::{init_model, train_local, TrainConfig};
use fedcref::protocol::{
    associate_clusters, run_clients, train_group_federated, ProtocolConfig, Termination,
};
use fedcref::{ClusterId, GroundTruth};
use ndarray::Axis;

#[test]
fn runs_are_bit_identical_across_thread_counts() {
    oracles::check_thread_determinism(3).unwrap();
}

#[test]
fn hidden_labels_do_not_influence_the_protocol() {
    let ds = generate_synthetic(5, 16, 300, 0.5, 21).unwrap();
    let mut sys = build_federation(&ds, 6, 40, 0.0, 21).unwrap();
    sys.apply_dirtiness(0.3, 21).unwrap();
    let (clients, truth) = sys.into_parts();
    let cfg = ProtocolConfig {
        max_iterations: 3,
        ..Default::default()
    };
    let plain = run_clients(clients.clone(), truth.clone(), &cfg, 5, |_| {}).unwrap();
    let permuted = run_clients(clients.clone(), truth.map_labels(|l| (l + 3) % 5), &cfg, 5, |_| {}).unwrap();
    let mut r = oracles::rng(1);
    let garbage = GroundTruth::new(
        clients
            .iter()
            .map(|c| (0..c.len()).map(|_| rand::Rng::random_range(&mut r, 0..9)).collect())
            .collect(),
    );
    let scrambled = run_clients(clients, garbage, &cfg, 5, |_| {}).unwrap();
    for other in [&permuted, &scrambled] {
        assert_eq!(plain.records.len(), other.records.len());
        for (a, b) in plain.records.iter().zip(&other.records) {
            assert_eq!(a.graph, b.graph);
            assert_eq!(a.metrics.active_count, b.metrics.active_count);
        }
        let assignments = |r: &fedcref::RunResult| {
            r.final_state.clients.iter().map(|c| c.assignment.clone()).collect::<Vec<_>>()
        };
        assert_eq!(assignments(&plain), assignments(other));
        assert_eq!(plain.final_state.local_models, other.final_state.local_models);
    }
    // a label permutation leaves the scores alone as well
    for (a, b) in plain.records.iter().zip(&permuted.records) {
        assert_eq!(a.metrics, b.metrics);
    }
}

#[test]
fn run_records_start_state_and_terminates() {
    let result = oracles::small_run(8);
    let start = result.initial();
    assert_eq!(start.iteration, 0);
    assert_eq!(start.communities_found, 0);
    assert_eq!(start.isolated_count, result.final_state.clients.iter().map(|c| c.k_local).sum::<usize>());
    assert_eq!(start.active_count, 6);
    for (i, r) in result.records.iter().enumerate() {
        assert_eq!(r.metrics.iteration, i);
    }
    let last = result.last();
    match result.termination {
        Termination::NoActiveClients => assert_eq!(last.active_count, 0),
        Termination::IterationCap => assert_eq!(last.iteration, 4),
        Termination::GlobalStop => assert!(result.records.len() >= 4),
    }
    assert!(result.records.len() <= 5);
}

#[test]
fn same_class_clusters_associate_and_different_ones_do_not() {
    let ds = generate_synthetic(5, 16, 1000, 0.5, 31).unwrap();
    let sys = build_federation(&ds, 10, 100, 0.0, 31).unwrap();
    let classes: Vec<Vec<u32>> = (0..10).map(|i| sys.client_classes(i).to_vec()).collect();
    let (clients, _) = sys.into_parts();
    let models: Vec<Vec<_>> = clients
        .iter()
        .map(|c| {
            (0..c.k_local)
                .map(|q| {
                    let init = init_model(&[16, 100, 64, 32], (c.client_id * 10 + q) as u64).unwrap();
                    train_local(&init, c.cluster_samples(q).view(), &TrainConfig::LOCAL, 1).unwrap()
                })
                .collect()
        })
        .collect();
    let edges = associate_clusters(&clients, &models, &Default::default()).unwrap();
    let class_of = |id: ClusterId| classes[id.client][id.cluster];
    for &(a, b) in &edges {
        assert_eq!(class_of(a), class_of(b), "edge {a} - {b} joins different classes");
    }
    let same_class_pairs = clients
        .iter()
        .flat_map(|c| (0..c.k_local).map(move |q| ClusterId::new(c.client_id, q)))
        .flat_map(|a| {
            let classes = &classes;
            (a.client + 1..10).flat_map(move |j| {
                (0..classes[j].len())
                    .map(move |p| (a, ClusterId::new(j, p)))
                    .filter(move |&(a, b)| classes[a.client][a.cluster] == classes[b.client][b.cluster])
            })
        })
        .count();
    assert!(
        edges.len() * 4 >= same_class_pairs * 3,
        "{} of {same_class_pairs} same-class pairs associated",
        edges.len()
    );
}

#[test]
fn group_training_beats_the_untrained_start_on_every_member() {
    let ds = generate_synthetic(2, 16, 200, 0.5, 41).unwrap();
    let x = ds.samples();
    let a = x.slice_axis(Axis(0), (0..100).into());
    let b = x.slice_axis(Axis(0), (100..200).into());
    let members = [(ClusterId::new(0, 0), a), (ClusterId::new(1, 1), b)];
    let sizes = [16, 100, 64, 32];
    let model =
        train_group_federated(&members, &sizes, 15, &TrainConfig::FEDERATED_ROUND, 6, 7).unwrap();
    let start = init_model(&sizes, 6).unwrap();
    for (_, m) in &members {
        assert!(model.loss(*m).unwrap() < start.loss(*m).unwrap());
    }
}
