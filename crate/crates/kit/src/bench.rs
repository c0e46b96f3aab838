//! Sequential versus tree chain products: wall time, depth, agreement and the
//! instrumented multiplication count.

use std::hint::black_box;
use std::time::{Duration, Instant};

use qpu_core::cubeedge::uniform_rotation;
use qpu_core::opcount::count_qfc_forward;
use qpu_core::qpu::tree_depth;
use qpu_core::Quaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::parallel::Executor;

/// Chain lengths benchmarked by default.
pub fn default_lengths() -> Vec<usize> {
    let mut ns: Vec<usize> = (1..=64).collect();
    ns.extend([127, 128, 1023, 1024]);
    ns
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub depth: u32,
    pub expected_depth: u32,
    /// Best time of one sequential product, seconds.
    pub sequential_secs: f64,
    /// Best time of one tree product, seconds.
    pub tree_secs: f64,
    /// Largest component-wise difference between the two results.
    pub max_diff: f64,
    /// Counted multiplications of a one-output QPU over `n` inputs.
    pub muls: u64,
    pub formula_muls: u64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.sequential_secs / self.tree_secs
    }
}

/// Left-to-right product, renormalized once.
pub fn chain_sequential(ps: &[Quaternion]) -> Quaternion {
    ps[1..].iter().fold(ps[0], |acc, p| acc * *p).normalized()
}

/// Best per-call time over `reps` timed batches, each batch long enough to
/// be well above timer resolution.
fn best_time(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut inner = 1usize;
    loop {
        let t = Instant::now();
        for _ in 0..inner {
            f();
        }
        if t.elapsed() >= Duration::from_micros(200) || inner >= 1 << 20 {
            break;
        }
        inner *= 2;
    }
    let mut best = f64::INFINITY;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        for _ in 0..inner {
            f();
        }
        best = best.min(t.elapsed().as_secs_f64() / inner as f64);
    }
    best
}

pub fn bench_chain(ns: &[usize], reps: usize, seed: u64, exec: &Executor) -> Result<Vec<BenchRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let ps: Vec<Quaternion> = (0..n.max(1)).map(|_| uniform_rotation(&mut rng)).collect();
        let seq = chain_sequential(&ps);
        let (tree, depth) = exec.chain_tree(&ps)?;
        let sequential_secs = best_time(reps, || {
            black_box(chain_sequential(black_box(&ps)));
        });
        let tree_secs = best_time(reps, || {
            black_box(exec.chain_tree(black_box(&ps)).unwrap());
        });
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, counts) = count_qfc_forward(&weights, &[0.0], &ps)?;
        rows.push(BenchRow {
            n,
            depth,
            expected_depth: tree_depth(n),
            sequential_secs,
            tree_secs,
            max_diff: seq.max_abs_diff(tree),
            muls: counts.mul,
            formula_muls: 17 * n as u64 - 16,
        });
    }
    Ok(rows)
}
