//! Thread-pool execution of the tree product and of per-sample work.
//!
//! Every parallel routine here returns exactly what its serial counterpart
//! returns: the tree pairs the same factors in the same order at every level,
//! and per-sample results are collected by index before any reduction.

use qpu_core::{Error as CoreError, Quaternion};
use rayon::prelude::*;

use crate::error::Result;

/// Pairs per task. Levels narrower than two tasks run inline.
pub const TREE_GRAIN: usize = 256;

pub struct Executor {
    pool: rayon::ThreadPool,
}

impl Executor {
    /// `threads = 0` picks the number of available cores.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// `f(0), …, f(n−1)` evaluated on the pool, returned in index order.
    pub fn map_indexed<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    /// Tree product of `ps`. Each level runs over component planes so the
    /// independent pair products vectorize; wide levels are also split
    /// across the pool. Returns the renormalized product and the number of
    /// levels.
    pub fn chain_tree(&self, ps: &[Quaternion]) -> Result<(Quaternion, u32)> {
        if ps.is_empty() {
            return Err(CoreError::EmptyChain.into());
        }
        let mut cur = Planes::from_quaternions(ps);
        let mut next = Planes::with_len(ps.len().div_ceil(2));
        let mut depth = 0;
        while cur.len() > 1 {
            let half = cur.len() / 2;
            next.truncate(cur.len().div_ceil(2));
            if self.threads() > 1 && half >= 2 * TREE_GRAIN {
                self.pool.install(|| {
                    next.chunks_mut(TREE_GRAIN).enumerate().for_each(|(c, out)| {
                        let lo = c * TREE_GRAIN;
                        pair_products(&cur, lo, out);
                    });
                });
            } else {
                pair_products(&cur, 0, next.whole());
            }
            if cur.len() % 2 == 1 {
                next.set(half, cur.get(cur.len() - 1));
            }
            std::mem::swap(&mut cur, &mut next);
            depth += 1;
        }
        Ok((cur.get(0).normalized(), depth))
    }
}

/// Quaternions stored as four separate component arrays.
struct Planes {
    s: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

/// Mutable window of a [`Planes`], starting at some output index.
struct PlanesMut<'a> {
    s: &'a mut [f64],
    x: &'a mut [f64],
    y: &'a mut [f64],
    z: &'a mut [f64],
}

impl Planes {
    fn with_len(n: usize) -> Self {
        Self { s: vec![0.0; n], x: vec![0.0; n], y: vec![0.0; n], z: vec![0.0; n] }
    }

    fn from_quaternions(ps: &[Quaternion]) -> Self {
        Self {
            s: ps.iter().map(|q| q.s).collect(),
            x: ps.iter().map(|q| q.v[0]).collect(),
            y: ps.iter().map(|q| q.v[1]).collect(),
            z: ps.iter().map(|q| q.v[2]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.s.len()
    }

    fn truncate(&mut self, n: usize) {
        self.s.truncate(n);
        self.x.truncate(n);
        self.y.truncate(n);
        self.z.truncate(n);
    }

    fn get(&self, i: usize) -> Quaternion {
        Quaternion::new(self.s[i], self.x[i], self.y[i], self.z[i])
    }

    fn set(&mut self, i: usize, q: Quaternion) {
        self.s[i] = q.s;
        self.x[i] = q.v[0];
        self.y[i] = q.v[1];
        self.z[i] = q.v[2];
    }

    fn whole(&mut self) -> PlanesMut<'_> {
        PlanesMut { s: &mut self.s, x: &mut self.x, y: &mut self.y, z: &mut self.z }
    }

    fn chunks_mut(&mut self, size: usize) -> impl IndexedParallelIterator<Item = PlanesMut<'_>> {
        let (s, x) = (self.s.par_chunks_mut(size), self.x.par_chunks_mut(size));
        let (y, z) = (self.y.par_chunks_mut(size), self.z.par_chunks_mut(size));
        s.zip(x).zip(y.zip(z)).map(|((s, x), (y, z))| PlanesMut { s, x, y, z })
    }
}

/// `out[i] = src[2(lo+i)] ⊗ src[2(lo+i)+1]` for every full pair covered by
/// `out`, with the operations of the scalar Hamilton product in its order.
fn pair_products(src: &Planes, lo: usize, out: PlanesMut<'_>) {
    let pairs = out.s.len().min(src.len() / 2 - lo);
    let r = 2 * lo..2 * (lo + pairs);
    let inputs = src.s[r.clone()]
        .chunks_exact(2)
        .zip(src.x[r.clone()].chunks_exact(2))
        .zip(src.y[r.clone()].chunks_exact(2).zip(src.z[r].chunks_exact(2)));
    let outputs = out.s[..pairs].iter_mut().zip(out.x[..pairs].iter_mut()).zip(out.y[..pairs].iter_mut().zip(out.z[..pairs].iter_mut()));
    for (((os, ox), (oy, oz)), ((s, x), (y, z))) in outputs.zip(inputs) {
        *os = s[0] * s[1] - x[0] * x[1] - y[0] * y[1] - z[0] * z[1];
        *ox = s[0] * x[1] + x[0] * s[1] + y[0] * z[1] - z[0] * y[1];
        *oy = s[0] * y[1] - x[0] * z[1] + y[0] * s[1] + z[0] * x[1];
        *oz = s[0] * z[1] + x[0] * y[1] - y[0] * x[1] + z[0] * s[1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qpu_core::qpu::chain_forward_tree_with_depth;
    use qpu_core::quat::AngleAxis;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pool_tree_is_bit_identical_to_serial_tree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let ps: Vec<Quaternion> = (0..3000)
            .map(|_| {
                let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0];
                AngleAxis::new(rng.random_range(0.0..6.0), axis).unwrap().to_quaternion()
            })
            .collect();
        for threads in [1, 3] {
            let exec = Executor::new(threads).unwrap();
            for n in [1, 2, 7, 1023, 1024, 2049, 3000] {
                assert_eq!(exec.chain_tree(&ps[..n]).unwrap(), chain_forward_tree_with_depth(&ps[..n]).unwrap());
            }
        }
        assert!(Executor::new(1).unwrap().chain_tree(&[]).is_err());
    }

    #[test]
    fn map_keeps_order() {
        let exec = Executor::new(2).unwrap();
        assert_eq!(exec.map_indexed(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
