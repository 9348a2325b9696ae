//! Dense autoencoders trained with Adam on mean squared reconstruction error.
//!
//! Layout: an encoder `d -> h1 -> ... -> hk` followed by the mirrored decoder
//! `hk -> ... -> h1 -> d`. Hidden layers use ReLU, the output layer uses a
//! sigmoid, and inputs are expected in `[0, 1]`. Weight matrices are stored
//! as `(fan_in, fan_out)` so a batch with samples in rows maps as `x W + b`.

mod adam;
mod checkpoint;
mod model;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{fedavg, init_model, ErrorVector, Gradients, Model};

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::seed;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    #[error("empty input")]
    EmptyInput,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("aggregation error: {0}")]
    Aggregation(String),
    #[error("checkpoint {field}: {detail}")]
    Checkpoint { field: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mini-batch schedule for one training call.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl TrainConfig {
    /// Local cluster models: 20 epochs of batch 64.
    pub const LOCAL: TrainConfig = TrainConfig {
        epochs: 20,
        batch_size: 64,
        adam: AdamConfig::DEFAULT,
    };

    /// One federated round: a single local epoch of batch 64.
    pub const FEDERATED_ROUND: TrainConfig = TrainConfig {
        epochs: 1,
        batch_size: 64,
        adam: AdamConfig::DEFAULT,
    };
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::LOCAL
    }
}

/// Trains a copy of `model` on `samples` with a fresh Adam state.
pub fn train_local(
    model: &Model,
    samples: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Model, NnError> {
    let mut opt = Adam::new(model, cfg.adam);
    train_with(model, samples, cfg, &mut opt, seed)
}

/// Trains a copy of `model` on `samples`, continuing from `opt`.
///
/// Samples are reshuffled every epoch from a stream derived from `seed`; the
/// last batch of an epoch may be short.
pub fn train_with(
    model: &Model,
    samples: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
    opt: &mut Adam,
    seed: u64,
) -> Result<Model, NnError> {
    if cfg.epochs == 0 {
        return Err(NnError::Precondition("epochs must be >= 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(NnError::Precondition("batch_size must be >= 1".into()));
    }
    if samples.nrows() == 0 {
        return Err(NnError::EmptyInput);
    }
    model.check_input(samples)?;
    opt.check_congruent(model)?;

    let mut model = model.clone();
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..samples.nrows()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = samples.select(Axis(0), chunk);
            let (loss, grads) = model.backward(batch.view())?;
            if !loss.is_finite() {
                return Err(NnError::TrainingDiverged { epoch });
            }
            opt.step(&mut model, &grads);
        }
    }
    if !model.is_finite() {
        return Err(NnError::TrainingDiverged {
            epoch: cfg.epochs - 1,
        });
    }
    Ok(model)
}
