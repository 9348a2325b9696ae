use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, LabeledDataset};
use crate::seed;

/// Per-coordinate noise standard deviation as a fraction of `separation`.
pub const SYNTHETIC_NOISE_RATIO: f64 = 1.0 / 16.0;

/// Standard deviation of the per-sample log noise scale.
pub const SYNTHETIC_LOG_SCALE_STD: f64 = 1.0;

const MEAN_LOW: f64 = 0.15;
const MEAN_HIGH: f64 = 0.85;
const MAX_MEAN_DRAWS: usize = 10_000;

/// Isotropic Gaussian blobs clipped to `[0, 1]^dim`.
///
/// Class means are drawn uniformly from `[0.15, 0.85]^dim` and rejected until
/// every pair is at least `separation` apart (Euclidean). Each sample is its
/// class mean plus isotropic Gaussian noise of standard deviation
/// `s * separation * SYNTHETIC_NOISE_RATIO`, where the per-sample scale `s`
/// is log-normal with log standard deviation `SYNTHETIC_LOG_SCALE_STD`. The
/// spread of `s` gives per-sample reconstruction errors the long tail that
/// image data has. Samples are stored class by class, labels `0..n_classes`.
pub fn generate_synthetic(
    n_classes: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset, DataError> {
    if n_classes < 2 {
        return Err(DataError::InvalidParameter {
            name: "n_classes",
            detail: format!("{n_classes} < 2"),
        });
    }
    if dim < 2 {
        return Err(DataError::InvalidParameter {
            name: "dim",
            detail: format!("{dim} < 2"),
        });
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(DataError::InvalidParameter {
            name: "separation",
            detail: format!("{separation} must be positive"),
        });
    }
    let mut rng = seed::rng(seed::derive(seed, "synthetic", &[]));
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    while means.len() < n_classes {
        let mut placed = false;
        for _ in 0..MAX_MEAN_DRAWS {
            let cand: Vec<f64> = (0..dim).map(|_| rng.random_range(MEAN_LOW..MEAN_HIGH)).collect();
            let far = means.iter().all(|m| {
                m.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= separation
            });
            if far {
                means.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(DataError::InvalidParameter {
                name: "separation",
                detail: format!("cannot place {n_classes} means {separation} apart in {dim} dimensions"),
            });
        }
    }

    let noise = Normal::new(0.0, separation * SYNTHETIC_NOISE_RATIO).expect("positive std");
    let log_scale = Normal::new(0.0, SYNTHETIC_LOG_SCALE_STD).expect("positive std");
    let mut samples = Array2::zeros((n_classes * per_class, dim));
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for (class, mean) in means.iter().enumerate() {
        for i in 0..per_class {
            let mut row = samples.row_mut(class * per_class + i);
            let s = log_scale.sample(&mut rng).exp();
            for (v, &mu) in row.iter_mut().zip(mean) {
                *v = (mu + s * noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
            labels.push(class as u32);
        }
    }
    LabeledDataset::new(samples, labels)
}
