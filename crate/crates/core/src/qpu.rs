//! The quaternion product unit.
//!
//! A QPU raises each input rotation to a learned power (with a shared angle
//! bias) and multiplies the results together with Hamilton products:
//!
//! ```text
//! QPU({q_i}; {w_i}, b) = ⊗_i qpow(q_i; w_i, b)
//! qpow(q; w, b)        = [cos(w (arccos(s) + b)), v/‖v‖ sin(w (arccos(s) + b))]
//! ```
//!
//! The backward pass uses the bilinearity of the Hamilton product: the
//! derivative of the chain with respect to its `k`-th factor is
//! `M_L(B_k) M_R(A_k)`, where `B_k` and `A_k` are the products of the factors
//! before and after `k`.

use alloc::vec::Vec;

use libm::{acos, cos, sin, sqrt};

use crate::error::{check_width, Error, Result};
use crate::quat::{clamp_real, dot, norm, product_matrices, scale, Quaternion, AXIS_EPS, CLAMP_EPS};

/// Weights and shared angle bias of one unit.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QpuParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl QpuParams {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        Self { w, b }
    }
}

/// Whether the backward pass reuses the forward cumulative products or
/// recomputes them.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TapeMode {
    #[default]
    Store,
    Recompute,
}

/// `qpow(q; w, b)`. An input without an axis maps to the identity whatever
/// `w` and `b` are.
pub fn qpow_biased(q: Quaternion, w: f64, b: f64) -> Quaternion {
    let n = norm(q.v);
    if n <= AXIS_EPS {
        return Quaternion::IDENTITY;
    }
    let angle = w * (acos(clamp_real(q.s)) + b);
    Quaternion { s: cos(angle), v: scale(q.v, sin(angle) / n) }
}

/// Gradients of one weighting function.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct WeightingGrad {
    pub dq: [f64; 4],
    pub dw: f64,
    pub db: f64,
}

/// Contracts `upstream` (the gradient with respect to `qpow_biased(q, w, b)`)
/// with the Jacobians of the weighting function.
///
/// `q` is treated as a free 4-vector. Outside the clamp interval the
/// derivative through `arccos` is zero; without an axis everything is zero
/// because the output is the constant identity.
pub fn qpow_biased_backward(q: Quaternion, w: f64, b: f64, upstream: [f64; 4]) -> WeightingGrad {
    let n = norm(q.v);
    if n <= AXIS_EPS {
        return WeightingGrad::default();
    }
    let u = scale(q.v, 1.0 / n);
    let s_c = clamp_real(q.s);
    let phi = acos(s_c) + b;
    let (sin_a, cos_a) = (sin(w * phi), cos(w * phi));

    let g_s = upstream[0];
    let g_v = [upstream[1], upstream[2], upstream[3]];
    let g_u = dot(g_v, u);

    // d out / d angle, where angle = w·phi
    let d_angle = -g_s * sin_a + g_u * cos_a;
    let dw = d_angle * phi;
    let db = d_angle * w;

    let inside = q.s > -1.0 + CLAMP_EPS && q.s < 1.0 - CLAMP_EPS;
    let dphi_ds = if inside { -1.0 / sqrt(1.0 - q.s * q.s) } else { 0.0 };
    let ds = db * dphi_ds;

    let k = sin_a / n;
    let dv = [
        k * (g_v[0] - g_u * u[0]),
        k * (g_v[1] - g_u * u[1]),
        k * (g_v[2] - g_u * u[2]),
    ];
    WeightingGrad { dq: [ds, dv[0], dv[1], dv[2]], dw, db }
}

/// Cumulative products saved by the forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTape {
    /// The factors `p_k` of the chain.
    pub weighted: Vec<Quaternion>,
    /// `c_k = p_1 ⊗ … ⊗ p_k`, before the final renormalization.
    pub cumulative: Vec<Quaternion>,
}

impl ChainTape {
    pub fn len(&self) -> usize {
        self.weighted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weighted.is_empty()
    }

    /// The unnormalized chain product `c_N`.
    pub fn product(&self) -> Quaternion {
        *self.cumulative.last().expect("non-empty tape")
    }

    /// `B_k`: product of the factors before `k` (0-based). Exact, read
    /// straight off the prefix products.
    pub fn before(&self, k: usize) -> Quaternion {
        if k == 0 {
            Quaternion::IDENTITY
        } else {
            self.cumulative[k - 1]
        }
    }

    /// `B_k = c_k ⊗ p_k*`, valid for unit factors.
    pub fn before_via_conjugate(&self, k: usize) -> Quaternion {
        self.cumulative[k] * self.weighted[k].conjugate()
    }

    /// `A_k = c_k* ⊗ c_N`, valid for unit factors.
    pub fn after_via_conjugate(&self, k: usize) -> Quaternion {
        self.cumulative[k].conjugate() * self.product()
    }

    fn check(&self) -> Result<()> {
        if self.weighted.is_empty() {
            return Err(Error::EmptyChain);
        }
        if self.weighted.len() != self.cumulative.len() {
            return Err(Error::TapeMismatch {
                expected: self.weighted.len(),
                got: self.cumulative.len(),
            });
        }
        Ok(())
    }
}

/// Left-to-right chain product `p_1 ⊗ … ⊗ p_N`, renormalized once at the end.
pub fn chain_forward(ps: &[Quaternion]) -> Result<(Quaternion, ChainTape)> {
    if ps.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut cumulative = Vec::with_capacity(ps.len());
    let mut acc = ps[0];
    cumulative.push(acc);
    for p in &ps[1..] {
        acc = acc * *p;
        cumulative.push(acc);
    }
    let tape = ChainTape { weighted: ps.to_vec(), cumulative };
    Ok((acc.normalized(), tape))
}

/// Number of pairwise levels the tree reduction needs: `⌈log₂ n⌉`.
pub fn tree_depth(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// One level of the tree reduction, in place: `buf[i] = buf[2i] ⊗ buf[2i+1]`,
/// with an odd trailing element carried through. Order is preserved, so the
/// result of the full reduction is the same chain product.
pub fn tree_level(buf: &mut Vec<Quaternion>) {
    let n = buf.len();
    let half = n / 2;
    for i in 0..half {
        buf[i] = buf[2 * i] * buf[2 * i + 1];
    }
    if n % 2 == 1 {
        buf[half] = buf[n - 1];
        buf.truncate(half + 1);
    } else {
        buf.truncate(half);
    }
}

/// Chain product computed by pairwise reduction. Returns the renormalized
/// product and the number of levels taken.
pub fn chain_forward_tree_with_depth(ps: &[Quaternion]) -> Result<(Quaternion, u32)> {
    if ps.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut buf = ps.to_vec();
    let mut depth = 0;
    while buf.len() > 1 {
        tree_level(&mut buf);
        depth += 1;
    }
    Ok((buf[0].normalized(), depth))
}

pub fn chain_forward_tree(ps: &[Quaternion]) -> Result<Quaternion> {
    chain_forward_tree_with_depth(ps).map(|(y, _)| y)
}

/// Gradient of the chain product with respect to each factor:
/// `∂L/∂p_k = M_Rᵀ(A_k) M_Lᵀ(B_k) ∂L/∂(⊗ p)`.
///
/// `A_k` is accumulated right to left, so no unit-norm assumption is needed.
/// The final renormalization is not differentiated; for unit factors it is
/// the identity on every tangent direction.
pub fn chain_backward(tape: &ChainTape, upstream: [f64; 4]) -> Result<Vec<[f64; 4]>> {
    tape.check()?;
    let n = tape.len();
    let mut grads = alloc::vec![[0.0; 4]; n];
    let mut after = Quaternion::IDENTITY;
    for k in (0..n).rev() {
        let (left, _) = product_matrices(tape.before(k));
        let (_, right) = product_matrices(after);
        grads[k] = right.transpose_mul_vec(left.transpose_mul_vec(upstream));
        after = tape.weighted[k] * after;
    }
    Ok(grads)
}

/// Forward pass of one unit.
pub fn qpu_forward(qs: &[Quaternion], params: &QpuParams) -> Result<(Quaternion, ChainTape)> {
    qpu_forward_with(qs, &params.w, params.b)
}

/// [`qpu_forward`] over borrowed weights, e.g. one row of a layer's matrix.
pub fn qpu_forward_with(qs: &[Quaternion], w: &[f64], b: f64) -> Result<(Quaternion, ChainTape)> {
    check_width("qpu weights", qs.len(), w.len())?;
    let weighted: Vec<Quaternion> = qs.iter().zip(w).map(|(q, w)| qpow_biased(*q, *w, b)).collect();
    chain_forward(&weighted)
}

/// Gradients of one unit with respect to its inputs, weights and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct QpuGradients {
    pub dq: Vec<[f64; 4]>,
    pub dw: Vec<f64>,
    /// Sum of the per-input bias contributions.
    pub db: f64,
}

/// Backward pass of one unit. With `tape = None` the cumulative products are
/// recomputed from `qs` and `params`.
pub fn qpu_backward(
    qs: &[Quaternion],
    params: &QpuParams,
    tape: Option<&ChainTape>,
    upstream: [f64; 4],
) -> Result<QpuGradients> {
    qpu_backward_with(qs, &params.w, params.b, tape, upstream)
}

/// [`qpu_backward`] over borrowed weights.
pub fn qpu_backward_with(
    qs: &[Quaternion],
    w: &[f64],
    b: f64,
    tape: Option<&ChainTape>,
    upstream: [f64; 4],
) -> Result<QpuGradients> {
    check_width("qpu weights", qs.len(), w.len())?;
    let recomputed;
    let tape = match tape {
        Some(t) => t,
        None => {
            recomputed = qpu_forward_with(qs, w, b)?.1;
            &recomputed
        }
    };
    if tape.len() != qs.len() {
        return Err(Error::TapeMismatch { expected: qs.len(), got: tape.len() });
    }
    let dp = chain_backward(tape, upstream)?;
    let mut dq = Vec::with_capacity(qs.len());
    let mut dw = Vec::with_capacity(qs.len());
    let mut db = 0.0;
    for ((q, w), g) in qs.iter().zip(w).zip(&dp) {
        let wg = qpow_biased_backward(*q, *w, b, *g);
        dq.push(wg.dq);
        dw.push(wg.dw);
        db += wg.db;
    }
    Ok(QpuGradients { dq, dw, db })
}
