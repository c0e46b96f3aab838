//! QPU graph aggregation: `q_i^agg = ⊗_j q_j^{a_ij}`, product over ascending `j`.
//!
//! Each output row is a QPU whose weights are a row of the adjacency matrix
//! and whose bias is zero, so forward and backward reuse the unit code.

use alloc::vec::Vec;

use crate::error::{check_width, Result};
use crate::qpu::{qpu_backward_with, qpu_forward_with, ChainTape};
use crate::quat::Quaternion;

/// Square matrix of real exponents; row `i` feeds output node `i`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdjacencyWeights {
    pub n: usize,
    pub a: Vec<f64>,
}

impl AdjacencyWeights {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        check_width("adjacency", n * n, a.len())?;
        Ok(Self { n, a })
    }

    pub fn identity(n: usize) -> Self {
        let mut a = alloc::vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        Self { n, a }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }
}

pub fn graph_aggregate(adj: &AdjacencyWeights, qs: &[Quaternion]) -> Result<Vec<Quaternion>> {
    graph_aggregate_taped(adj, qs).map(|(ys, _)| ys)
}

pub fn graph_aggregate_taped(
    adj: &AdjacencyWeights,
    qs: &[Quaternion],
) -> Result<(Vec<Quaternion>, Vec<ChainTape>)> {
    check_width("aggregate input", adj.n, qs.len())?;
    let mut ys = Vec::with_capacity(adj.n);
    let mut tapes = Vec::with_capacity(adj.n);
    for i in 0..adj.n {
        let (y, tape) = qpu_forward_with(qs, adj.row(i), 0.0)?;
        ys.push(y);
        tapes.push(tape);
    }
    Ok((ys, tapes))
}

/// Returns `(input gradients, adjacency gradients)`.
pub fn graph_aggregate_backward(
    adj: &AdjacencyWeights,
    qs: &[Quaternion],
    tapes: &[ChainTape],
    upstream: &[[f64; 4]],
) -> Result<(Vec<[f64; 4]>, Vec<f64>)> {
    check_width("aggregate input", adj.n, qs.len())?;
    check_width("aggregate upstream", adj.n, upstream.len())?;
    check_width("aggregate tapes", adj.n, tapes.len())?;
    let mut dq = alloc::vec![[0.0; 4]; adj.n];
    let mut da = Vec::with_capacity(adj.a.len());
    for i in 0..adj.n {
        let g = qpu_backward_with(qs, adj.row(i), 0.0, Some(&tapes[i]), upstream[i])?;
        for (acc, d) in dq.iter_mut().zip(&g.dq) {
            for c in 0..4 {
                acc[c] += d[c];
            }
        }
        da.extend_from_slice(&g.dw);
    }
    Ok((dq, da))
}
