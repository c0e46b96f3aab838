//! Large-sample check of QPU rotation invariance and equivariance.

use qpu_core::cubeedge::uniform_rotation;
use qpu_core::qpu::{qpu_forward, QpuParams};
use qpu_core::quat::{norm, rotate_vector, sub3};
use qpu_core::Quaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::parallel::Executor;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub trials: usize,
    pub inputs: usize,
    /// Largest `|Re y − Re y′|`.
    pub max_real_dev: f64,
    /// Largest `‖R(Im y) − Im y′‖`.
    pub max_imag_dev: f64,
}

/// One trial: random unit inputs, weights, bias and rotation `R`; returns
/// the deviations between `y = QPU(q)` and `y′ = QPU([s, R(v)])`.
pub fn invariance_trial(seed: u64, trial: usize, n: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let qs: Vec<Quaternion> = (0..n).map(|_| uniform_rotation(&mut rng)).collect();
    let params = QpuParams::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(-1.0..1.0));
    let r = uniform_rotation(&mut rng);
    let rotated: Vec<Quaternion> = qs.iter().map(|q| Quaternion { s: q.s, v: rotate_vector(r, q.v) }).collect();
    let (y, _) = qpu_forward(&qs, &params)?;
    let (y_rot, _) = qpu_forward(&rotated, &params)?;
    Ok(((y.s - y_rot.s).abs(), norm(sub3(rotate_vector(r, y.v), y_rot.v))))
}

pub fn verify_invariance(trials: usize, n: usize, seed: u64, exec: &Executor) -> Result<InvarianceReport> {
    let devs = exec.map_indexed(trials, |t| invariance_trial(seed, t, n));
    let mut report = InvarianceReport { trials, inputs: n, max_real_dev: 0.0, max_imag_dev: 0.0 };
    for d in devs {
        let (re, im) = d?;
        report.max_real_dev = report.max_real_dev.max(re);
        report.max_imag_dev = report.max_imag_dev.max(im);
    }
    Ok(report)
}
