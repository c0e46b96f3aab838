use alloc::vec::Vec;

use rand::Rng;

use super::init::xavier_uniform;
use crate::error::{check_width, Result};

/// Fully-connected real layer `y = W x + b`, optionally rectified.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out × n_in`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub rectify: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub inputs: Vec<f64>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rectify: bool, rng: &mut R) -> Self {
        Self {
            n_in,
            n_out,
            weights: xavier_uniform(n_in, n_out, rng),
            biases: alloc::vec![0.0; n_out],
            rectify,
        }
    }

    pub fn from_parts(n_in: usize, n_out: usize, weights: Vec<f64>, biases: Vec<f64>, rectify: bool) -> Result<Self> {
        check_width("dense weights", n_in * n_out, weights.len())?;
        check_width("dense biases", n_out, biases.len())?;
        Ok(Self { n_in, n_out, weights, biases, rectify })
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_width("dense input", self.n_in, x.len())?;
        Ok(self
            .weights
            .chunks_exact(self.n_in)
            .zip(&self.biases)
            .map(|(row, b)| {
                let z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
                if self.rectify { z.max(0.0) } else { z }
            })
            .collect())
    }

    /// `y` is the output of [`DenseLayer::forward`] on `x`; it supplies the
    /// rectifier mask.
    pub fn backward(&self, x: &[f64], y: &[f64], upstream: &[f64]) -> Result<DenseGrads> {
        check_width("dense input", self.n_in, x.len())?;
        check_width("dense output", self.n_out, y.len())?;
        check_width("dense upstream", self.n_out, upstream.len())?;
        let dz: Vec<f64> = upstream
            .iter()
            .zip(y)
            .map(|(g, yi)| if self.rectify && *yi <= 0.0 { 0.0 } else { *g })
            .collect();
        let mut inputs = alloc::vec![0.0; self.n_in];
        let mut weights = Vec::with_capacity(self.weights.len());
        for (row, d) in self.weights.chunks_exact(self.n_in).zip(&dz) {
            for ((acc, w), xi) in inputs.iter_mut().zip(row).zip(x) {
                *acc += w * d;
                weights.push(d * xi);
            }
        }
        Ok(DenseGrads { inputs, weights, biases: dz })
    }
}
