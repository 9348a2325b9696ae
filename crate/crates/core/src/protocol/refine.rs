use ndarray::{Array2, ArrayView2};

use super::ProtocolError;
use crate::nn::Model;

/// Outcome of one client's cluster refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    /// New cluster per sample, in `0..k`.
    pub assignment: Vec<usize>,
    /// Index into the candidate list (local models first, then federated
    /// models) of the model that formed each cluster, in formation order.
    pub selected: Vec<usize>,
}

/// Reassigns a client's samples among `k` clusters using its `k` local
/// models and the received federated models.
///
/// Round `p` takes every still-unassigned sample, finds its lowest-error
/// model among the models not yet selected, picks the model that wins the
/// most samples, and forms cluster `p` from those samples. After `k` rounds,
/// leftovers go to their best model among the selected ones. Ties go to the
/// lower model index, in both the per-sample argmin and the winner count.
/// Clusters may end up empty.
pub fn cluster_refine(
    samples: ArrayView2<'_, f64>,
    local_models: &[Model],
    federated_models: &[&Model],
) -> Result<Refinement, ProtocolError> {
    let k = local_models.len();
    if k == 0 {
        return Err(ProtocolError::Contract("refinement needs at least one local model".into()));
    }
    let candidates: Vec<&Model> = local_models.iter().chain(federated_models.iter().copied()).collect();
    let n = samples.nrows();
    let mut errors = Array2::<f64>::zeros((n, candidates.len()));
    if n > 0 {
        for (j, model) in candidates.iter().enumerate() {
            let e = model.reconstruction_errors(samples)?;
            errors.column_mut(j).assign(&ndarray::ArrayView1::from(e.as_slice()));
        }
    }
    Ok(refine_from_errors(&errors, k))
}

/// Refinement given a precomputed `(samples, candidates)` error matrix; the
/// first `k` columns are the local models.
pub fn refine_from_errors(errors: &Array2<f64>, k: usize) -> Refinement {
    let (n, m) = errors.dim();
    let argmin = |row: usize, allowed: &[bool]| -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in 0..m {
            if allowed[j] && best.is_none_or(|b| errors[[row, j]] < errors[[row, b]]) {
                best = Some(j);
            }
        }
        best
    };

    let mut available = vec![true; m];
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut selected = Vec::with_capacity(k);
    for p in 0..k.min(m) {
        let mut counts = vec![0usize; m];
        let mut best_of = vec![usize::MAX; n];
        for row in 0..n {
            if assignment[row].is_none() {
                let b = argmin(row, &available).expect("a model remains");
                best_of[row] = b;
                counts[b] += 1;
            }
        }
        let mut winner = None;
        for j in 0..m {
            if available[j] && winner.is_none_or(|w: usize| counts[j] > counts[w]) {
                winner = Some(j);
            }
        }
        let winner = winner.expect("a model remains");
        for row in 0..n {
            if assignment[row].is_none() && best_of[row] == winner {
                assignment[row] = Some(p);
            }
        }
        available[winner] = false;
        selected.push(winner);
    }

    let mut chosen = vec![false; m];
    for &s in &selected {
        chosen[s] = true;
    }
    let assignment = (0..n)
        .map(|row| {
            assignment[row].unwrap_or_else(|| {
                let b = argmin(row, &chosen).expect("k >= 1 models selected");
                selected.iter().position(|&s| s == b).expect("selected")
            })
        })
        .collect();
    Refinement { assignment, selected }
}
