use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::NnError;
use crate::seed;

/// Rows evaluated per forward chunk when computing per-sample errors.
const EVAL_CHUNK: usize = 512;

/// A dense autoencoder with a mirrored decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Gradients (or any parameter-shaped quantity) congruent to a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Per-sample reconstruction errors, aligned with the evaluated samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorVector(Vec<f64>);

impl ErrorVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Builds a Glorot-uniform initialized autoencoder.
///
/// `encoder_sizes` lists the encoder widths starting with the input dimension,
/// e.g. `[784, 100, 64, 32]`; the decoder mirrors it back to the input
/// dimension. Biases start at zero.
pub fn init_model(encoder_sizes: &[usize], seed: u64) -> Result<Model, NnError> {
    let layer_sizes = mirrored(encoder_sizes)?;
    let mut rng = seed::rng(seed);
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for pair in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
            rng.random_range(-limit..=limit)
        }));
        biases.push(Array1::zeros(fan_out));
    }
    Ok(Model {
        layer_sizes,
        weights,
        biases,
    })
}

fn mirrored(encoder_sizes: &[usize]) -> Result<Vec<usize>, NnError> {
    if encoder_sizes.len() < 2 {
        return Err(NnError::InvalidArchitecture(format!(
            "need an input width and at least one hidden width, got {encoder_sizes:?}"
        )));
    }
    if let Some(pos) = encoder_sizes.iter().position(|&w| w == 0) {
        return Err(NnError::InvalidArchitecture(format!(
            "layer {pos} has zero width in {encoder_sizes:?}"
        )));
    }
    let mut sizes = encoder_sizes.to_vec();
    sizes.extend(encoder_sizes.iter().rev().skip(1));
    Ok(sizes)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Model {
    /// Assembles a model from explicit parameters. `layer_sizes` is the full
    /// width list (encoder and decoder) and must read the same reversed.
    pub fn from_parameters(
        layer_sizes: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Model, NnError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(NnError::InvalidArchitecture(format!(
                "bad layer sizes {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().ne(layer_sizes.iter().rev()) {
            return Err(NnError::InvalidArchitecture(format!(
                "decoder does not mirror encoder: {layer_sizes:?}"
            )));
        }
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(NnError::InvalidArchitecture(format!(
                "{layers} layers but {} weight and {} bias blocks",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].dim() != (pair[0], pair[1]) || biases[l].len() != pair[1] {
                return Err(NnError::Shape {
                    expected: format!("layer {l}: ({}, {}) + {}", pair[0], pair[1], pair[1]),
                    actual: format!("{:?} + {}", weights[l].dim(), biases[l].len()),
                });
            }
        }
        Ok(Model {
            layer_sizes,
            weights,
            biases,
        })
    }

    /// Full width list including the decoder.
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn encoder_sizes(&self) -> &[usize] {
        &self.layer_sizes[..self.layer_sizes.len() / 2 + 1]
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &Model) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    pub(crate) fn check_input(&self, batch: ArrayView2<'_, f64>) -> Result<(), NnError> {
        if batch.ncols() != self.input_dim() {
            return Err(NnError::Shape {
                expected: format!("{} columns", self.input_dim()),
                actual: format!("{} columns", batch.ncols()),
            });
        }
        Ok(())
    }

    fn activate(&self, layer: usize, z: &mut Array2<f64>) {
        if layer + 1 == self.weights.len() {
            z.mapv_inplace(sigmoid);
        } else {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }

    fn layer(&self, layer: usize, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights[layer]);
        z += &self.biases[layer];
        self.activate(layer, &mut z);
        z
    }

    /// Reconstructs every row of `batch`.
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(batch)?;
        let mut h = self.layer(0, batch);
        for l in 1..self.weights.len() {
            h = self.layer(l, h.view());
        }
        Ok(h)
    }

    /// Mean over features of the squared reconstruction error, per sample.
    pub fn reconstruction_errors(
        &self,
        samples: ArrayView2<'_, f64>,
    ) -> Result<ErrorVector, NnError> {
        if samples.nrows() == 0 {
            return Err(NnError::EmptyInput);
        }
        self.check_input(samples)?;
        let d = samples.ncols() as f64;
        let mut errors = Vec::with_capacity(samples.nrows());
        let mut start = 0;
        while start < samples.nrows() {
            let end = (start + EVAL_CHUNK).min(samples.nrows());
            let x = samples.slice(s![start..end, ..]);
            let out = self.forward(x)?;
            for (row_out, row_in) in out.outer_iter().zip(x.outer_iter()) {
                let sq: f64 = row_out
                    .iter()
                    .zip(row_in.iter())
                    .map(|(o, i)| (o - i) * (o - i))
                    .sum();
                errors.push(sq / d);
            }
            start = end;
        }
        Ok(ErrorVector(errors))
    }

    /// Mean per-sample reconstruction error over `samples`.
    pub fn loss(&self, samples: ArrayView2<'_, f64>) -> Result<f64, NnError> {
        Ok(self.reconstruction_errors(samples)?.mean())
    }

    /// Loss and gradients of the batch-mean MSE with respect to every parameter.
    pub fn backward(&self, batch: ArrayView2<'_, f64>) -> Result<(f64, Gradients), NnError> {
        if batch.nrows() == 0 {
            return Err(NnError::EmptyInput);
        }
        self.check_input(batch)?;
        let layers = self.weights.len();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers + 1);
        acts.push(batch.to_owned());
        for l in 0..layers {
            let next = self.layer(l, acts[l].view());
            acts.push(next);
        }

        let scale = 2.0 / (batch.nrows() * batch.ncols()) as f64;
        let out = &acts[layers];
        let mut loss = 0.0;
        let mut delta = Array2::zeros(out.raw_dim());
        Zip::from(&mut delta)
            .and(out)
            .and(&batch)
            .for_each(|dl, &o, &x| {
                let diff = o - x;
                loss += diff * diff;
                *dl = scale * diff * o * (1.0 - o);
            });
        loss *= scale / 2.0;

        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            gw[l] = acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                Zip::from(&mut prev).and(&acts[l]).for_each(|p, &a| {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                });
                delta = prev;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        ))
    }
}

/// Weighted parameter average. Weights are normalized to sum to one and the
/// accumulation follows input order.
pub fn fedavg(models: &[&Model], weights: &[f64]) -> Result<Model, NnError> {
    let first = models
        .first()
        .ok_or_else(|| NnError::Aggregation("no models to aggregate".into()))?;
    if models.len() != weights.len() {
        return Err(NnError::Aggregation(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(NnError::Aggregation(format!(
            "weights must be finite and non-negative: {weights:?}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(NnError::Aggregation("weights sum to zero".into()));
    }
    if let Some(bad) = models.iter().position(|m| !m.same_shape(first)) {
        return Err(NnError::Aggregation(format!(
            "model {bad} has layer sizes {:?}, expected {:?}",
            models[bad].layer_sizes, first.layer_sizes
        )));
    }

    let mut out = Model {
        layer_sizes: first.layer_sizes.clone(),
        weights: first.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        biases: first.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
    };
    for (model, &w) in models.iter().zip(weights) {
        let w = w / total;
        for (acc, p) in out.weights.iter_mut().zip(&model.weights) {
            acc.scaled_add(w, p);
        }
        for (acc, p) in out.biases.iter_mut().zip(&model.biases) {
            acc.scaled_add(w, p);
        }
    }
    Ok(out)
}
