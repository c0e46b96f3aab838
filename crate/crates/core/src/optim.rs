//! First-order optimizers over a model's parameter buffers.

use alloc::vec::Vec;

use libm::{pow, sqrt};

use crate::error::{check_width, Result};
use crate::layers::{LayerGrads, ModelGraph};

#[derive(Copy, Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM: OptimizerKind = OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 };
}

/// Optimizer with its moment buffers, laid out like
/// [`ModelGraph::flat_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of a flat parameter vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_width("optimizer gradients", params.len(), grads.len())?;
        self.begin(params.len())?;
        self.update(0, params, grads);
        Ok(())
    }

    /// One update of every layer of `model`.
    pub fn step_model(&mut self, model: &mut ModelGraph, grads: &[LayerGrads]) -> Result<()> {
        check_width("optimizer layers", model.layers.len(), grads.len())?;
        self.begin(model.param_count())?;
        let mut at = 0;
        for (layer, g) in model.layers.iter_mut().zip(grads) {
            let (w, b) = layer.params_mut();
            check_width("optimizer weight gradients", w.len(), g.weights.len())?;
            check_width("optimizer bias gradients", b.len(), g.biases.len())?;
            self.update(at, w, &g.weights);
            at += w.len();
            self.update(at, b, &g.biases);
            at += b.len();
        }
        Ok(())
    }

    fn begin(&mut self, n: usize) -> Result<()> {
        if self.m.is_empty() && self.step == 0 {
            self.m = alloc::vec![0.0; n];
            self.v = alloc::vec![0.0; n];
        }
        check_width("optimizer state", self.m.len(), n)?;
        self.step += 1;
        Ok(())
    }

    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as f64;
                let c1 = 1.0 - pow(beta1, t);
                let c2 = 1.0 - pow(beta2, t);
                let m = &mut self.m[offset..offset + params.len()];
                let v = &mut self.v[offset..offset + params.len()];
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] -= self.lr * m_hat / (sqrt(v_hat) + eps);
                }
            }
        }
    }
}
