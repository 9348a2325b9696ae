use ndarray::{Array1, Array2, Zip};

use super::{Gradients, Model, NnError};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub const DEFAULT: AdamConfig = AdamConfig {
        lr: 1e-3,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Adam moment estimates congruent to one model.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Adam {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        let zw = || -> Vec<Array2<f64>> {
            model.weights().iter().map(|w| Array2::zeros(w.raw_dim())).collect()
        };
        let zb = || -> Vec<Array1<f64>> {
            model.biases().iter().map(|b| Array1::zeros(b.raw_dim())).collect()
        };
        Adam {
            config,
            step: 0,
            m_w: zw(),
            v_w: zw(),
            m_b: zb(),
            v_b: zb(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub(crate) fn check_congruent(&self, model: &Model) -> Result<(), NnError> {
        let ok = self.m_w.len() == model.weights().len()
            && self
                .m_w
                .iter()
                .zip(model.weights())
                .all(|(m, w)| m.dim() == w.dim());
        if ok {
            Ok(())
        } else {
            Err(NnError::Shape {
                expected: format!("{:?}", model.layer_sizes()),
                actual: "optimizer state for a different architecture".into(),
            })
        }
    }

    /// Applies one bias-corrected Adam update to `model`.
    pub fn step(&mut self, model: &mut Model, grads: &Gradients) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let step_size = lr / (1.0 - beta1.powi(t));
        let v_corr = 1.0 - beta2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= step_size * *m / ((*v / v_corr).sqrt() + eps);
        };
        for l in 0..grads.weights.len() {
            Zip::from(&mut model.weights_mut()[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut model.biases_mut()[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}
