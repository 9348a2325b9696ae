//! Independent reference implementations and the property checks built on
//! them. Shared by the integration tests and the acceptance target.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use fedcref::data::{build_federation, generate_synthetic};
use fedcref::metrics::{acc, hungarian};
use fedcref::nn::{init_model, Model};
use fedcref::protocol::{refine_from_errors, run_fedcref, AssociationGraph, ProtocolConfig};
use fedcref::ClusterId;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Loop-based forward pass. Returns the output and every hidden pre-activation.
pub fn naive_forward(model: &Model, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let layers = model.weights().len();
    let mut h = x.to_vec();
    let mut pre = Vec::new();
    for l in 0..layers {
        let w = &model.weights()[l];
        let b = &model.biases()[l];
        let z: Vec<f64> = (0..w.ncols())
            .map(|j| b[j] + (0..w.nrows()).map(|i| h[i] * w[[i, j]]).sum::<f64>())
            .collect();
        if l + 1 == layers {
            h = z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        } else {
            h = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
        }
    }
    (h, pre)
}

/// Per-sample mean squared reconstruction error, one sample at a time.
pub fn naive_errors(model: &Model, x: ArrayView2<'_, f64>) -> Vec<f64> {
    x.outer_iter()
        .map(|row| {
            let row = row.to_vec();
            let (out, _) = naive_forward(model, &row);
            out.iter().zip(&row).map(|(o, i)| (o - i) * (o - i)).sum::<f64>() / row.len() as f64
        })
        .collect()
}

fn naive_loss(model: &Model, x: ArrayView2<'_, f64>) -> (f64, Vec<bool>) {
    let mut mask = Vec::new();
    let mut total = 0.0;
    for row in x.outer_iter() {
        let row = row.to_vec();
        let (out, pre) = naive_forward(model, &row);
        total += out.iter().zip(&row).map(|(o, i)| (o - i) * (o - i)).sum::<f64>();
        mask.extend(pre.iter().flatten().map(|&z| z > 0.0));
    }
    (total / (x.nrows() * x.ncols()) as f64, mask)
}

/// Random model with every width in `1..=8` (input at least 2) and
/// parameters uniform in `[-1, 1]`.
pub fn random_small_model(r: &mut ChaCha8Rng) -> Model {
    let depth = r.random_range(1..=3);
    let mut sizes = vec![r.random_range(2..=8)];
    for _ in 0..depth {
        sizes.push(r.random_range(1..=8));
    }
    let mut m = init_model(&sizes, r.random()).expect("valid widths");
    for w in m.weights_mut() {
        w.mapv_inplace(|_| r.random_range(-1.0..1.0));
    }
    for b in m.biases_mut() {
        b.mapv_inplace(|_| r.random_range(-1.0..1.0));
    }
    m
}

pub fn random_batch(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.random_range(0.0..1.0))
}

pub struct GradientReport {
    pub models: usize,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub worst_rel_err: f64,
}

const FD_STEP: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-6;

/// Central finite differences against `Model::backward` on `models` random
/// models. Entries whose perturbation flips a ReLU are skipped.
pub fn check_gradients(models: usize, seed: u64) -> Result<GradientReport, String> {
    let mut r = rng(seed);
    let mut report = GradientReport {
        models,
        checked: 0,
        skipped_kinks: 0,
        worst_rel_err: 0.0,
    };
    for case in 0..models {
        let model = random_small_model(&mut r);
        let rows = r.random_range(1..=4);
        let x = random_batch(&mut r, rows, model.input_dim());
        let (_, grads) = model.backward(x.view()).map_err(|e| e.to_string())?;
        let (_, base_mask) = naive_loss(&model, x.view());
        let mut probe = |layer: usize, idx: usize, is_bias: bool, analytic: f64| -> Result<(), String> {
            let eval = |delta: f64| {
                let mut m = model.clone();
                if is_bias {
                    m.biases_mut()[layer][idx] += delta;
                } else {
                    let cols = m.weights()[layer].ncols();
                    m.weights_mut()[layer][[idx / cols, idx % cols]] += delta;
                }
                naive_loss(&m, x.view())
            };
            let (plus, mask_p) = eval(FD_STEP);
            let (minus, mask_m) = eval(-FD_STEP);
            if mask_p != base_mask || mask_m != base_mask {
                report.skipped_kinks += 1;
                return Ok(());
            }
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR);
            report.checked += 1;
            report.worst_rel_err = report.worst_rel_err.max(rel);
            if rel >= 1e-4 {
                return Err(format!(
                    "case {case}: layer {layer} {} {idx}: analytic {analytic} numeric {numeric}",
                    if is_bias { "bias" } else { "weight" }
                ));
            }
            Ok(())
        };
        for l in 0..grads.weights.len() {
            for (idx, &g) in grads.weights[l].iter().enumerate() {
                probe(l, idx, false, g)?;
            }
            for (idx, &g) in grads.biases[l].iter().enumerate() {
                probe(l, idx, true, g)?;
            }
        }
    }
    Ok(report)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Hungarian minimum cost against exhaustive search over all permutations.
/// Integer-valued matrices (many ties) alternate with continuous ones.
pub fn check_hungarian(matrices: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let perms: Vec<Vec<Vec<usize>>> = (0..=6).map(permutations).collect();
    for case in 0..matrices {
        let k = r.random_range(1..=6);
        let integer = case % 2 == 0;
        let cost = Array2::from_shape_fn((k, k), |_| {
            if integer {
                r.random_range(0..5) as f64
            } else {
                r.random_range(-10.0..10.0)
            }
        });
        let assign = hungarian(&cost).map_err(|e| e.to_string())?;
        let mut seen = vec![false; k];
        for &c in &assign {
            if c >= k || seen[c] {
                return Err(format!("case {case}: {assign:?} is not a permutation"));
            }
            seen[c] = true;
        }
        let total = |p: &[usize]| (0..k).map(|i| cost[[i, p[i]]]).sum::<f64>();
        let got = total(&assign);
        let best = perms[k].iter().map(|p| total(p)).fold(f64::INFINITY, f64::min);
        let ok = if integer { got == best } else { (got - best).abs() <= 1e-9 };
        if !ok {
            return Err(format!("case {case}: hungarian {got} vs brute force {best}\n{cost:?}"));
        }
    }
    Ok(())
}

/// ACC by trying every relabeling of `0..k`.
pub fn brute_acc(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|p| pred.iter().zip(truth).filter(|(&a, &b)| p[a] == b).count())
        .max()
        .unwrap_or(0) as f64
        / pred.len() as f64
}

/// ACC against brute force, plus bound, symmetry and relabeling invariance.
pub fn check_acc(labelings: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for case in 0..labelings {
        let k = r.random_range(1..=5);
        let n = r.random_range(1..=40);
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let b: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let perm = &permutations(k)[r.random_range(0..(1..=k).product::<usize>())];
        let a_relabeled: Vec<usize> = a.iter().map(|&x| perm[x]).collect();
        let ab = acc(&a, &b).map_err(|e| e.to_string())?;
        let checks = [
            ("brute force", (ab - brute_acc(&a, &b, k)).abs() < 1e-12),
            ("bounds", ab > 0.0 && ab <= 1.0),
            ("symmetry", (ab - acc(&b, &a).unwrap()).abs() < 1e-12),
            ("relabeling", (ab - acc(&a_relabeled, &b).unwrap()).abs() < 1e-12),
            ("identity", acc(&a, &a_relabeled).unwrap() == 1.0),
            ("lower bound", ab * k as f64 >= 1.0 - 1e-12),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(format!("case {case}: {name} failed for {a:?} vs {b:?} (acc {ab})"));
        }
    }
    Ok(())
}

/// Components of size >= 2 and isolated vertices against BFS reachability.
pub fn check_components(graphs: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for case in 0..graphs {
        let n = r.random_range(1..=12);
        let ids: Vec<ClusterId> = (0..n).map(|i| ClusterId::new(i / 3, i % 3)).collect();
        let p = r.random_range(0.0..0.4);
        let mut adj = vec![Vec::new(); n];
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && r.random_bool(p / 2.0) {
                    edges.push((ids[a], ids[b]));
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut expected: BTreeSet<Vec<ClusterId>> = BTreeSet::new();
        let mut expected_isolated = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![];
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.push(ids[v]);
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        queue.push_back(u);
                    }
                }
            }
            comp.sort();
            if comp.len() >= 2 {
                expected.insert(comp);
            } else {
                expected_isolated.push(comp[0]);
            }
        }
        let g = AssociationGraph::from_edges(&edges, &ids);
        let got: BTreeSet<Vec<ClusterId>> = g.communities().iter().cloned().collect();
        let mut got_isolated = g.isolated().to_vec();
        got_isolated.sort();
        if got != expected || got_isolated != expected_isolated || got.len() != g.communities().len() {
            return Err(format!("case {case}: components differ for edges {edges:?}"));
        }
    }
    Ok(())
}

/// Refinement on random error matrices (small integer values, so ties are
/// common): the result is a partition into `k` clusters formed by `k`
/// distinct models, and every sample sits with its lowest-error selected
/// model, lower index first on ties.
pub fn check_refinement(cases: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for case in 0..cases {
        let m = r.random_range(1..=7);
        let k = r.random_range(1..=m.min(4));
        let n = r.random_range(0..=30);
        let errors = Array2::from_shape_fn((n, m), |_| r.random_range(0..6) as f64 / 10.0);
        let out = refine_from_errors(&errors, k);
        let distinct: BTreeSet<usize> = out.selected.iter().copied().collect();
        if out.selected.len() != k || distinct.len() != k || out.selected.iter().any(|&s| s >= m) {
            return Err(format!("case {case}: bad selection {:?}", out.selected));
        }
        if out.assignment.len() != n || out.assignment.iter().any(|&a| a >= k) {
            return Err(format!("case {case}: not a partition {:?}", out.assignment));
        }
        for i in 0..n {
            let best = (0..m)
                .filter(|j| distinct.contains(j))
                .fold(None, |b: Option<usize>, j| match b {
                    Some(b) if errors[[i, b]] <= errors[[i, j]] => Some(b),
                    _ => Some(j),
                })
                .expect("k >= 1");
            if out.selected[out.assignment[i]] != best {
                return Err(format!(
                    "case {case}: sample {i} went to model {} but argmin over selected is {best}\n{errors:?}",
                    out.selected[out.assignment[i]]
                ));
            }
        }
    }
    Ok(())
}

/// A small synthetic run, for determinism checks.
pub fn small_run(seed: u64) -> fedcref::RunResult {
    let ds = generate_synthetic(5, 16, 300, 0.5, seed).expect("synthetic");
    let mut sys = build_federation(&ds, 6, 40, 0.0, seed).expect("federation");
    sys.apply_dirtiness(0.3, seed).expect("dirtiness");
    let cfg = ProtocolConfig {
        max_iterations: 4,
        ..Default::default()
    };
    run_fedcref(sys, &cfg, seed).expect("run")
}

/// The same run on 1 and 8 worker threads must agree bit for bit.
pub fn check_thread_determinism(seed: u64) -> Result<(), String> {
    let run_on = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| small_run(seed))
    };
    let (a, b) = (run_on(1), run_on(8));
    let traces = |r: &fedcref::RunResult| r.records.iter().map(|x| x.trace()).collect::<Vec<_>>();
    let metrics = |r: &fedcref::RunResult| r.records.iter().map(|x| x.metrics.clone()).collect::<Vec<_>>();
    if traces(&a) != traces(&b) || metrics(&a) != metrics(&b) {
        return Err("metrics or graphs differ between 1 and 8 threads".into());
    }
    let (sa, sb) = (&a.final_state, &b.final_state);
    if sa.local_models != sb.local_models
        || sa.group_models != sb.group_models
        || sa.clients.iter().map(|c| &c.assignment).ne(sb.clients.iter().map(|c| &c.assignment))
    {
        return Err("models or assignments differ between 1 and 8 threads".into());
    }
    Ok(())
}

/// Share of samples whose nearest empirical class mean is their own class.
pub fn nearest_centroid_accuracy(ds: &fedcref::LabeledDataset) -> f64 {
    let x = ds.samples();
    let classes = ds.class_set();
    let centroids: Vec<Vec<f64>> = classes
        .iter()
        .map(|&c| {
            let rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == c).collect();
            (0..ds.dim())
                .map(|j| rows.iter().map(|&i| x[[i, j]]).sum::<f64>() / rows.len() as f64)
                .collect()
        })
        .collect();
    let correct = (0..ds.len())
        .filter(|&i| {
            let dist = |c: &Vec<f64>| (0..ds.dim()).map(|j| (x[[i, j]] - c[j]).powi(2)).sum::<f64>();
            let best = (0..classes.len())
                .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                .expect("at least one class");
            classes[best] == ds.labels()[i]
        })
        .count();
    correct as f64 / ds.len() as f64
}
