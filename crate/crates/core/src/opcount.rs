//! Instrumented scalar forward pass of a QPU fully-connected layer.
//!
//! Every arithmetic operation of the weighting step and the Hamilton chain
//! goes through a [`Tally`], in the same order as the production code path,
//! so the outputs are bit-identical to [`crate::layers::QpuFcLayer::forward`].

use alloc::vec::Vec;

use libm::{acos, cos, sin, sqrt};

use crate::error::{check_width, Result};
use crate::quat::{clamp_real, Quaternion, AXIS_EPS};

/// Operation tallies.
///
/// `mul` and `add` cover the angle weighting `w·(arccos(s) + b)` and the
/// Hamilton products of the chain. Axis normalization, scaling the axis by the
/// sine, and the final renormalization are tallied in `aux` instead.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub mul: u64,
    pub add: u64,
    /// `arccos` evaluations plus `(cos, sin)` pairs.
    pub trig: u64,
    pub aux: u64,
}

#[derive(Default)]
struct Tally {
    counts: OpCounts,
}

impl Tally {
    #[inline]
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        self.counts.mul += 1;
        a * b
    }

    #[inline]
    fn add(&mut self, a: f64, b: f64) -> f64 {
        self.counts.add += 1;
        a + b
    }

    #[inline]
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        self.counts.add += 1;
        a - b
    }

    fn hamilton(&mut self, a: Quaternion, b: Quaternion) -> Quaternion {
        let s0 = self.mul(a.s, b.s);
        let s1 = self.mul(a.v[0], b.v[0]);
        let s2 = self.mul(a.v[1], b.v[1]);
        let s3 = self.mul(a.v[2], b.v[2]);
        let s = self.sub(s0, s1);
        let s = self.sub(s, s2);
        let s = self.sub(s, s3);

        let x0 = self.mul(a.s, b.v[0]);
        let x1 = self.mul(a.v[0], b.s);
        let x2 = self.mul(a.v[1], b.v[2]);
        let x3 = self.mul(a.v[2], b.v[1]);
        let x = self.add(x0, x1);
        let x = self.add(x, x2);
        let x = self.sub(x, x3);

        let y0 = self.mul(a.s, b.v[1]);
        let y1 = self.mul(a.v[0], b.v[2]);
        let y2 = self.mul(a.v[1], b.s);
        let y3 = self.mul(a.v[2], b.v[0]);
        let y = self.sub(y0, y1);
        let y = self.add(y, y2);
        let y = self.add(y, y3);

        let z0 = self.mul(a.s, b.v[2]);
        let z1 = self.mul(a.v[0], b.v[1]);
        let z2 = self.mul(a.v[1], b.v[0]);
        let z3 = self.mul(a.v[2], b.s);
        let z = self.add(z0, z1);
        let z = self.sub(z, z2);
        let z = self.add(z, z3);

        Quaternion { s, v: [x, y, z] }
    }

    fn weight(&mut self, q: Quaternion, w: f64, b: f64) -> Quaternion {
        self.counts.aux += 6; // squared norm of v (3 mul, 2 add) and sqrt
        let n = sqrt(q.v[0] * q.v[0] + q.v[1] * q.v[1] + q.v[2] * q.v[2]);
        if n <= AXIS_EPS {
            return Quaternion::IDENTITY;
        }
        self.counts.trig += 1;
        let phi = self.add(acos(clamp_real(q.s)), b);
        let angle = self.mul(w, phi);
        self.counts.trig += 1;
        let k = sin(angle) / n;
        self.counts.aux += 4;
        Quaternion { s: cos(angle), v: [q.v[0] * k, q.v[1] * k, q.v[2] * k] }
    }
}

/// Forward pass of an `N → M` QPU-FC layer with every operation counted.
/// `weights` is `M × N`, row-major.
pub fn count_qfc_forward(
    weights: &[f64],
    biases: &[f64],
    qs: &[Quaternion],
) -> Result<(Vec<Quaternion>, OpCounts)> {
    let n = qs.len();
    let m = biases.len();
    check_width("qpu-fc weights", n * m, weights.len())?;
    if n == 0 {
        return Err(crate::error::Error::EmptyChain);
    }
    let mut tally = Tally::default();
    let mut out = Vec::with_capacity(m);
    for (row, b) in weights.chunks_exact(n).zip(biases) {
        let mut acc = tally.weight(qs[0], row[0], *b);
        for (q, w) in qs[1..].iter().zip(&row[1..]) {
            let p = tally.weight(*q, *w, *b);
            acc = tally.hamilton(acc, p);
        }
        tally.counts.aux += 12; // renormalization: norm (4 mul, 3 add, sqrt), reciprocal, 4 mul
        out.push(acc.normalized());
    }
    Ok((out, tally.counts))
}
