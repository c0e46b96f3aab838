#![allow(dead_code)]

use qpu_core::quat::{AngleAxis, Quaternion, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vec(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v: Vec3 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Unit quaternion with rotation angle in `[lo, hi]`, so the real part stays
/// away from the clamp boundary.
pub fn unit_quat_in(rng: &mut impl Rng, lo: f64, hi: f64) -> Quaternion {
    AngleAxis::new(rng.random_range(lo..hi), unit_vec(rng)).unwrap().to_quaternion()
}

pub fn unit_quat(rng: &mut impl Rng) -> Quaternion {
    unit_quat_in(rng, 0.2, 6.0)
}

pub fn unit_quats(rng: &mut impl Rng, n: usize) -> Vec<Quaternion> {
    (0..n).map(|_| unit_quat(rng)).collect()
}

pub fn rotation(rng: &mut impl Rng) -> Quaternion {
    qpu_core::cubeedge::uniform_rotation(rng)
}

/// `[s, R(v)]` for every input.
pub fn rotate_axes(q: Quaternion, qs: &[Quaternion]) -> Vec<Quaternion> {
    qs.iter().map(|p| Quaternion { s: p.s, v: qpu_core::quat::rotate_vector(q, p.v) }).collect()
}

pub fn flatten(qs: &[Quaternion]) -> Vec<f64> {
    qs.iter().flat_map(|q| q.to_array()).collect()
}

pub fn unflatten(x: &[f64]) -> Vec<Quaternion> {
    x.chunks_exact(4).map(|c| Quaternion::from_array([c[0], c[1], c[2], c[3]])).collect()
}
