use std::collections::{BTreeMap, VecDeque};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::association::{all_cluster_ids, directional_matrix, mutual_edges};
use super::federated::{group_fingerprint, train_group_federated};
use super::graph::AssociationGraph;
use super::refine::cluster_refine;
use super::{ClusterId, ProtocolConfig, ProtocolError};
use crate::data::{ClientState, FederationSystem, GroundTruth};
use crate::metrics::{self, hungarian, IterationMetrics};
use crate::nn::{init_model, train_local, Model};
use crate::seed;

/// Federated model of one community.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupModel {
    pub members: Vec<ClusterId>,
    pub model: Model,
}

/// Everything the protocol carries between iterations. Holds no ground truth.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    pub clients: Vec<ClientState>,
    /// `local_models[client][cluster]`; empty until the first iteration.
    pub local_models: Vec<Vec<Model>>,
    pub group_models: Vec<GroupModel>,
    pub graph: AssociationGraph,
    pub iteration: usize,
    /// Recent `(communities, isolated)` counts, oldest first.
    pub history: VecDeque<(usize, usize)>,
    /// Assignment of each client before its latest refinement.
    pub previous_assignments: Vec<Vec<usize>>,
}

impl ProtocolState {
    pub fn active_set(&self) -> Vec<usize> {
        self.clients.iter().filter(|c| c.active).map(|c| c.client_id).collect()
    }
}

/// What happened in one iteration.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub iteration: usize,
    pub graph: AssociationGraph,
    /// Client assignments as they were when the graph was built.
    pub association_assignments: Vec<Vec<usize>>,
    pub deactivated: Vec<usize>,
    pub global_stop: bool,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    NoActiveClients,
    GlobalStop,
    IterationCap,
}

/// Clients whose assignment agrees with the previous one at ACC >= `tau`
/// leave the active set; the rest stay. Inactive clients never rejoin.
pub fn update_active_set(
    clients: &mut [ClientState],
    previous: &[Vec<usize>],
    tau: f64,
) -> Vec<usize> {
    let mut deactivated = Vec::new();
    for c in clients.iter_mut().filter(|c| c.active) {
        let prev = &previous[c.client_id];
        let stable = if c.assignment.is_empty() {
            true
        } else {
            metrics::acc(prev, &c.assignment).map(|a| a >= tau).unwrap_or(false)
        };
        if stable {
            c.active = false;
            deactivated.push(c.client_id);
        }
    }
    deactivated
}

fn relative_change(from: usize, to: usize) -> f64 {
    if from == to {
        0.0
    } else if from == 0 {
        f64::INFINITY
    } else {
        (to as f64 - from as f64).abs() / from as f64
    }
}

/// True once the last `window` `(communities, isolated)` entries change by
/// at most `max_rel_change` between consecutive iterations, relative to the
/// earlier value.
pub fn check_global_stop(history: &[(usize, usize)], window: usize, max_rel_change: f64) -> bool {
    if history.len() < window || window < 2 {
        return false;
    }
    history[history.len() - window..].windows(2).all(|w| {
        relative_change(w[0].0, w[1].0) <= max_rel_change
            && relative_change(w[0].1, w[1].1) <= max_rel_change
    })
}

/// Renames the clusters of `new` so that they overlap `old` as much as
/// possible. Both use labels in `0..k`.
fn align_labels(old: &[usize], new: &[usize], k: usize) -> Vec<usize> {
    let mut counts = Array2::<f64>::zeros((k, k));
    for (&n, &o) in new.iter().zip(old) {
        counts[[n, o]] += 1.0;
    }
    let mapping = hungarian(&counts.mapv(|c| -c)).expect("finite square matrix");
    new.iter().map(|&n| mapping[n]).collect()
}

/// The protocol state machine.
pub struct Protocol {
    state: ProtocolState,
    cfg: ProtocolConfig,
    seed: u64,
    encoder_sizes: Vec<usize>,
}

impl Protocol {
    pub fn new(clients: Vec<ClientState>, cfg: ProtocolConfig, seed: u64) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let dim = clients
            .first()
            .map(|c| c.samples.ncols())
            .ok_or_else(|| ProtocolError::Contract("no clients".into()))?;
        for (pos, c) in clients.iter().enumerate() {
            if c.client_id != pos {
                return Err(ProtocolError::Contract(format!("client at {pos} has id {}", c.client_id)));
            }
            if !c.is_partition() || c.samples.ncols() != dim {
                return Err(ProtocolError::Contract(format!("client {pos} is malformed")));
            }
        }
        let ids = all_cluster_ids(&clients);
        let previous = clients.iter().map(|c| c.assignment.clone()).collect();
        Ok(Self {
            state: ProtocolState {
                clients,
                local_models: Vec::new(),
                group_models: Vec::new(),
                graph: AssociationGraph::unconnected(&ids),
                iteration: 0,
                history: VecDeque::new(),
                previous_assignments: previous,
            },
            encoder_sizes: cfg.encoder_sizes(dim),
            cfg,
            seed,
        })
    }

    pub fn state(&self) -> &ProtocolState {
        &self.state
    }

    pub fn into_state(self) -> ProtocolState {
        self.state
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    fn train_local_models(&mut self) -> Result<(), ProtocolError> {
        let first = self.state.local_models.is_empty();
        let jobs: Vec<ClusterId> = self
            .state
            .clients
            .iter()
            .filter(|c| first || c.active)
            .flat_map(|c| (0..c.k_local).map(move |q| ClusterId::new(c.client_id, q)))
            .collect();
        let iteration = self.state.iteration as u64;
        let trained: Vec<Option<Model>> = jobs
            .par_iter()
            .map(|&id| -> Result<Option<Model>, ProtocolError> {
                let samples = self.state.clients[id.client].cluster_samples(id.cluster);
                let ids = [id.client as u64, id.cluster as u64];
                let init = init_model(&self.encoder_sizes, seed::derive(self.seed, "local-init", &ids))?;
                if samples.nrows() == 0 {
                    // Keep the previous model of an emptied cluster.
                    return Ok(if first { Some(init) } else { None });
                }
                let s = seed::derive(self.seed, "local-train", &[iteration, ids[0], ids[1]]);
                Ok(Some(train_local(&init, samples.view(), &self.cfg.local_train, s)?))
            })
            .collect::<Result<_, _>>()?;

        if first {
            self.state.local_models = self.state.clients.iter().map(|c| Vec::with_capacity(c.k_local)).collect();
        }
        for (id, model) in jobs.into_iter().zip(trained) {
            let slot = &mut self.state.local_models[id.client];
            match model {
                Some(m) if first => slot.push(m),
                Some(m) => slot[id.cluster] = m,
                None => {}
            }
        }
        Ok(())
    }

    fn train_groups(&self, graph: &AssociationGraph) -> Result<Vec<GroupModel>, ProtocolError> {
        let iteration = self.state.iteration as u64;
        graph
            .communities()
            .par_iter()
            .map(|members| {
                let samples: Vec<Array2<f64>> = members
                    .iter()
                    .map(|id| self.state.clients[id.client].cluster_samples(id.cluster))
                    .collect();
                let views: Vec<(ClusterId, ArrayView2<'_, f64>)> =
                    members.iter().copied().zip(samples.iter().map(|s| s.view())).collect();
                let fingerprint = group_fingerprint(self.seed, members);
                let model = train_group_federated(
                    &views,
                    &self.encoder_sizes,
                    self.cfg.thresholds.fl_rounds,
                    &self.cfg.federated_round,
                    fingerprint,
                    seed::derive(fingerprint, "shuffle", &[iteration]),
                )?;
                Ok(GroupModel {
                    members: members.clone(),
                    model,
                })
            })
            .collect()
    }

    fn refine_active(&mut self) -> Result<Vec<usize>, ProtocolError> {
        let federated: Vec<&Model> = self.state.group_models.iter().map(|g| &g.model).collect();
        let active: Vec<usize> = self.state.active_set();
        let refined: Vec<Vec<usize>> = active
            .par_iter()
            .map(|&i| {
                let client = &self.state.clients[i];
                let r = cluster_refine(client.samples.view(), &self.state.local_models[i], &federated)?;
                Ok(align_labels(&client.assignment, &r.assignment, client.k_local))
            })
            .collect::<Result<_, ProtocolError>>()?;
        for (i, assignment) in active.into_iter().zip(refined) {
            let client = &mut self.state.clients[i];
            self.state.previous_assignments[i] = std::mem::replace(&mut client.assignment, assignment);
        }
        Ok(update_active_set(
            &mut self.state.clients,
            &self.state.previous_assignments,
            self.cfg.thresholds.tau,
        ))
    }

    /// Runs one full iteration.
    pub fn step(&mut self) -> Result<StepReport, ProtocolError> {
        self.state.iteration += 1;
        self.train_local_models()?;

        let (ids, pass) = directional_matrix(&self.state.clients, &self.state.local_models, &self.cfg.thresholds)?;
        let graph = AssociationGraph::from_edges(&mutual_edges(&ids, &pass), &ids);
        let association_assignments = self.state.clients.iter().map(|c| c.assignment.clone()).collect();

        self.state.group_models = self.train_groups(&graph)?;
        let deactivated = self.refine_active()?;

        let t = &self.cfg.thresholds;
        self.state.history.push_back((graph.communities().len(), graph.isolated().len()));
        while self.state.history.len() > t.global_stop_window {
            self.state.history.pop_front();
        }
        let history: Vec<(usize, usize)> = self.state.history.iter().copied().collect();
        let global_stop = check_global_stop(&history, t.global_stop_window, t.global_stop_rel_change);
        self.state.graph = graph.clone();
        Ok(StepReport {
            iteration: self.state.iteration,
            graph,
            association_assignments,
            deactivated,
            global_stop,
        })
    }
}

/// Metrics and graph of one iteration (iteration 0 is the initial state).
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub metrics: IterationMetrics,
    pub graph: AssociationGraph,
}

/// One line of the JSON-lines trace log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub communities_found: usize,
    pub isolated: usize,
    pub active: usize,
    pub wrong_assoc_pct: f64,
    pub mean_acc: f64,
    /// Members of each community as `client:cluster` strings.
    pub communities: Vec<Vec<String>>,
}

impl IterationRecord {
    pub fn trace(&self) -> TraceRecord {
        let m = &self.metrics;
        TraceRecord {
            iteration: m.iteration,
            communities_found: m.communities_found,
            isolated: m.isolated_count,
            active: m.active_count,
            wrong_assoc_pct: m.wrong_assoc_pct,
            mean_acc: m.mean_acc,
            communities: self
                .graph
                .communities()
                .iter()
                .map(|c| c.iter().map(|id| id.to_string()).collect())
                .collect(),
        }
    }
}

/// Result of a full protocol run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_state: ProtocolState,
    pub truth: GroundTruth,
}

impl RunResult {
    pub fn metrics(&self) -> Vec<&IterationMetrics> {
        self.records.iter().map(|r| &r.metrics).collect()
    }

    pub fn initial(&self) -> &IterationMetrics {
        &self.records[0].metrics
    }

    pub fn last(&self) -> &IterationMetrics {
        &self.records.last().expect("iteration 0 is always recorded").metrics
    }

    pub fn cap_terminated(&self) -> bool {
        self.termination == Termination::IterationCap
    }
}

/// Runs the protocol to termination, scoring every iteration.
pub fn run_fedcref(
    system: FederationSystem,
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<RunResult, ProtocolError> {
    run_fedcref_observed(system, cfg, seed, |_| {})
}

/// Like [`run_fedcref`], calling `observe` after every recorded iteration.
///
/// Only this driver touches the ground truth; the [`Protocol`] itself sees
/// client samples and assignments alone.
pub fn run_fedcref_observed(
    system: FederationSystem,
    cfg: &ProtocolConfig,
    seed: u64,
    observe: impl FnMut(&IterationRecord),
) -> Result<RunResult, ProtocolError> {
    let (clients, truth) = system.into_parts();
    run_clients(clients, truth, cfg, seed, observe)
}

/// Runs the protocol on clients whose hidden labels are held separately.
pub fn run_clients(
    clients: Vec<ClientState>,
    truth: GroundTruth,
    cfg: &ProtocolConfig,
    seed: u64,
    mut observe: impl FnMut(&IterationRecord),
) -> Result<RunResult, ProtocolError> {
    if truth.num_clients() != clients.len() {
        return Err(ProtocolError::Contract(format!(
            "{} clients but labels for {}",
            clients.len(),
            truth.num_clients()
        )));
    }
    let mut protocol = Protocol::new(clients, cfg.clone(), seed)?;

    let start_graph = protocol.state().graph.clone();
    let labels = metrics::cluster_true_labels(&protocol.state().clients, &truth);
    let start = IterationRecord {
        metrics: metrics::collect(0, &start_graph, &labels, &protocol.state().clients, &truth),
        graph: start_graph,
    };
    observe(&start);
    let mut records = vec![start];

    let termination = loop {
        if protocol.state().iteration >= cfg.max_iterations {
            break Termination::IterationCap;
        }
        let report = protocol.step()?;
        let state = protocol.state();
        let labels = association_labels(&state.clients, &report.association_assignments, &truth);
        let record = IterationRecord {
            metrics: metrics::collect(report.iteration, &report.graph, &labels, &state.clients, &truth),
            graph: report.graph,
        };
        observe(&record);
        records.push(record);
        if state.clients.iter().all(|c| !c.active) {
            break Termination::NoActiveClients;
        }
        if report.global_stop {
            break Termination::GlobalStop;
        }
    };
    Ok(RunResult {
        records,
        termination,
        final_state: protocol.into_state(),
        truth,
    })
}

fn association_labels(
    clients: &[ClientState],
    assignments: &[Vec<usize>],
    truth: &GroundTruth,
) -> BTreeMap<ClusterId, Option<u32>> {
    let snapshot: Vec<ClientState> = clients
        .iter()
        .zip(assignments)
        .map(|(c, a)| ClientState {
            client_id: c.client_id,
            samples: Array2::zeros((0, 0)),
            assignment: a.clone(),
            k_local: c.k_local,
            active: c.active,
        })
        .collect();
    metrics::cluster_true_labels(&snapshot, truth)
}
