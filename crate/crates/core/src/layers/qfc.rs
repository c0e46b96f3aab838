use alloc::vec::Vec;

use rand::Rng;

use super::init::xavier_uniform;
use crate::error::{check_width, Result};
use crate::qpu::{qpu_backward_with, qpu_forward_with, ChainTape, TapeMode};
use crate::quat::Quaternion;

/// `M` QPUs sharing the same `N` input quaternions.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QpuFcLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out × n_in`, row-major; row `m` holds the weights of unit `m`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub tape_mode: TapeMode,
}

/// Gradients of a QPU-FC layer.
#[derive(Clone, Debug, PartialEq)]
pub struct QfcGrads {
    pub inputs: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl QpuFcLayer {
    /// Xavier-initialized weights, zero biases.
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            n_in,
            n_out,
            weights: xavier_uniform(n_in, n_out, rng),
            biases: alloc::vec![0.0; n_out],
            tape_mode: TapeMode::Store,
        }
    }

    pub fn from_parts(n_in: usize, n_out: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        check_width("qpu-fc weights", n_in * n_out, weights.len())?;
        check_width("qpu-fc biases", n_out, biases.len())?;
        Ok(Self { n_in, n_out, weights, biases, tape_mode: TapeMode::Store })
    }

    pub fn with_tape_mode(mut self, mode: TapeMode) -> Self {
        self.tape_mode = mode;
        self
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_in..(m + 1) * self.n_in]
    }

    /// Outputs of every unit. Tapes are returned only in [`TapeMode::Store`].
    pub fn forward(&self, qs: &[Quaternion]) -> Result<(Vec<Quaternion>, Option<Vec<ChainTape>>)> {
        check_width("qpu-fc input", self.n_in, qs.len())?;
        let mut ys = Vec::with_capacity(self.n_out);
        let mut tapes = Vec::with_capacity(if self.tape_mode == TapeMode::Store { self.n_out } else { 0 });
        for m in 0..self.n_out {
            let (y, tape) = qpu_forward_with(qs, self.row(m), self.biases[m])?;
            ys.push(y);
            if self.tape_mode == TapeMode::Store {
                tapes.push(tape);
            }
        }
        Ok((ys, (self.tape_mode == TapeMode::Store).then_some(tapes)))
    }

    /// Input gradients sum the contributions of all units.
    pub fn backward(
        &self,
        qs: &[Quaternion],
        tapes: Option<&[ChainTape]>,
        upstream: &[[f64; 4]],
    ) -> Result<QfcGrads> {
        check_width("qpu-fc input", self.n_in, qs.len())?;
        check_width("qpu-fc upstream", self.n_out, upstream.len())?;
        if let Some(t) = tapes {
            check_width("qpu-fc tapes", self.n_out, t.len())?;
        }
        let mut grads = QfcGrads {
            inputs: alloc::vec![[0.0; 4]; self.n_in],
            weights: Vec::with_capacity(self.weights.len()),
            biases: Vec::with_capacity(self.n_out),
        };
        for m in 0..self.n_out {
            let tape = tapes.map(|t| &t[m]);
            let g = qpu_backward_with(qs, self.row(m), self.biases[m], tape, upstream[m])?;
            for (acc, d) in grads.inputs.iter_mut().zip(&g.dq) {
                for c in 0..4 {
                    acc[c] += d[c];
                }
            }
            grads.weights.extend_from_slice(&g.dw);
            grads.biases.push(g.db);
        }
        Ok(grads)
    }
}
