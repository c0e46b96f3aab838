use alloc::vec::Vec;

use libm::sqrt;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Half-width of the Xavier uniform interval, `√(6 / (n_in + n_out))`.
pub fn xavier_bound(n_in: usize, n_out: usize) -> f64 {
    sqrt(6.0 / (n_in + n_out) as f64)
}

/// `n_out × n_in` matrix (row-major) drawn i.i.d. from the Xavier uniform
/// distribution.
pub fn xavier_uniform<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Vec<f64> {
    assert!(n_in > 0 && n_out > 0, "layer dimensions must be positive");
    let bound = xavier_bound(n_in, n_out);
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    dist.sample_iter(rng).take(n_in * n_out).collect()
}

/// Deterministic per seed.
pub fn init_xavier(n_in: usize, n_out: usize, seed: u64) -> Vec<f64> {
    xavier_uniform(n_in, n_out, &mut ChaCha8Rng::seed_from_u64(seed))
}
