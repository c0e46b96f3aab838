//! CubeEdge: chains of consecutive unit-cube edges, classified by shape.
//!
//! The first two edges are fixed, `(0,0,0) → (1,0,0) → (1,1,0)`. Every later
//! edge leaves the current vertex along one of the two axes other than the
//! incoming one; a bit picks the lower (0) or higher (1) axis index. A chain
//! of `n` edges therefore has `2^(n-2)` shapes, and the label is the choice
//! sequence read as a binary number, first choice most significant.
//!
//! Features are the rotations between consecutive edge vectors.

use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::quat::{from_two_vectors, norm, normalize_canonical, rotate_vector, sub3, Quaternion, Vec3, AXIS_EPS};

/// Generator settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenConfig {
    pub n_edges: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of the Gaussian vertex noise.
    pub sigma: f64,
    /// Shear factors are drawn from `[-shear_range, shear_range]`.
    pub shear_range: f64,
    pub seed: u64,
    /// Also add vertex noise to the training split.
    pub train_noise: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { n_edges: 7, n_train: 2000, n_test: 2000, sigma: 0.0, shear_range: 0.5, seed: 0, train_noise: false }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_edges < 3 {
            return Err(Error::InvalidConfig("n_edges must be at least 3"));
        }
        if self.n_edges > 40 {
            return Err(Error::InvalidConfig("n_edges must be at most 40"));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::InvalidConfig("sigma must be a finite non-negative number"));
        }
        if !self.shear_range.is_finite() || self.shear_range < 0.0 {
            return Err(Error::InvalidConfig("shear_range must be a finite non-negative number"));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        class_count(self.n_edges)
    }

    /// Feature quaternions per sample.
    pub fn feature_len(&self) -> usize {
        self.n_edges - 1
    }
}

pub fn class_count(n_edges: usize) -> usize {
    1usize << (n_edges - 2)
}

/// What was done to a skeleton after it left the cube.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerturbRecord {
    /// `[a, b]` of the xy-plane shear `x' = x + a y`, `y' = y + b x`.
    pub shear: [f64; 2],
    /// Per-vertex noise added before the shear; empty when none was added.
    pub noise: Vec<Vec3>,
    pub rotation: Option<Quaternion>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubeSkeleton {
    pub vertices: Vec<Vec3>,
    pub label: usize,
    pub perturb: PerturbRecord,
}

impl CubeSkeleton {
    pub fn edges(&self) -> Vec<Vec3> {
        self.vertices.windows(2).map(|w| sub3(w[1], w[0])).collect()
    }
}

/// Rotations between consecutive edges.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonFeatures {
    pub qs: Vec<Quaternion>,
}

/// Walks the cube following `choices` (one per edge after the second).
pub fn generate_skeleton(choices: &[bool]) -> CubeSkeleton {
    let mut vertices: Vec<Vec3> = alloc::vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
    let mut incoming = 1usize;
    let mut label = 0usize;
    for &bit in choices {
        let others: [usize; 2] = match incoming {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        let axis = others[bit as usize];
        let mut next = *vertices.last().expect("seeded with three vertices");
        next[axis] = 1.0 - next[axis];
        vertices.push(next);
        incoming = axis;
        label = (label << 1) | bit as usize;
    }
    CubeSkeleton { vertices, label, perturb: PerturbRecord::default() }
}

/// Choice bits of a label, most significant first.
pub fn label_to_choices(label: usize, n_edges: usize) -> Vec<bool> {
    let n = n_edges - 2;
    (0..n).map(|i| (label >> (n - 1 - i)) & 1 == 1).collect()
}

/// Applies noise, then the xy shear, then an optional rotation about the origin.
pub fn perturb(sk: &CubeSkeleton, shear_xy: [f64; 2], noise: &[Vec3], rotation: Option<Quaternion>) -> CubeSkeleton {
    let [a, b] = shear_xy;
    let vertices = sk
        .vertices
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let p = match noise.get(i) {
                Some(n) => [p[0] + n[0], p[1] + n[1], p[2] + n[2]],
                None => *p,
            };
            let p = [p[0] + a * p[1], p[1] + b * p[0], p[2]];
            match rotation {
                Some(q) => rotate_vector(q, p),
                None => p,
            }
        })
        .collect();
    CubeSkeleton {
        vertices,
        label: sk.label,
        perturb: PerturbRecord { shear: shear_xy, noise: noise.to_vec(), rotation },
    }
}

/// Rotates every vertex about the origin.
pub fn rotate_vertices(vertices: &[Vec3], q: Quaternion) -> Vec<Vec3> {
    vertices.iter().map(|p| rotate_vector(q, *p)).collect()
}

pub fn featurize(sk: &CubeSkeleton) -> Result<SkeletonFeatures> {
    featurize_vertices(&sk.vertices)
}

/// Fails with [`Error::DegenerateEdge`] when an edge has (numerically) zero
/// length.
pub fn featurize_vertices(vertices: &[Vec3]) -> Result<SkeletonFeatures> {
    if vertices.len() < 3 {
        return Err(Error::InvalidConfig("a skeleton needs at least two edges"));
    }
    let edges: Vec<Vec3> = vertices.windows(2).map(|w| sub3(w[1], w[0])).collect();
    if let Some(index) = edges.iter().position(|e| norm(*e) <= AXIS_EPS) {
        return Err(Error::DegenerateEdge { index });
    }
    let qs = edges.windows(2).map(|e| from_two_vectors(e[0], e[1])).collect::<Result<Vec<_>>>()?;
    Ok(SkeletonFeatures { qs })
}

/// Rotation drawn uniformly from SO(3): a normalized 4-D Gaussian, with the
/// non-negative real part representative.
pub fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
    loop {
        let mut c = [0.0; 4];
        for x in &mut c {
            *x = rng.sample(StandardNormal);
        }
        if let Ok(q) = normalize_canonical(Quaternion::from_array(c)) {
            return q;
        }
    }
}

/// One stored record: label, vertices after perturbation, features.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub label: usize,
    pub vertices: Vec<Vec3>,
    pub features: Vec<Quaternion>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: GenConfig,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Random stream of one sample. Every sample has its own stream, so samples
/// can be generated in any order or in parallel.
pub fn sample_rng(seed: u64, split: Split, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split_bit = match split {
        Split::Train => 0u64,
        Split::Test => 1u64 << 63,
    };
    rng.set_stream(split_bit | index as u64);
    rng
}

/// Generates sample `index` of `split`. Noise hits the test split (and the
/// train split only with `train_noise`); rotations are never applied here.
pub fn generate_sample(config: &GenConfig, split: Split, index: usize) -> Result<Sample> {
    config.validate()?;
    let mut rng = sample_rng(config.seed, split, index);
    let label = rng.random_range(0..config.classes());
    let base = generate_skeleton(&label_to_choices(label, config.n_edges));
    let a = if config.shear_range > 0.0 {
        Uniform::new_inclusive(-config.shear_range, config.shear_range)
            .expect("finite range")
            .sample(&mut rng)
    } else {
        0.0
    };
    let noisy = config.sigma > 0.0 && (split == Split::Test || config.train_noise);
    let normal = Normal::new(0.0, config.sigma).map_err(|_| Error::InvalidConfig("sigma"))?;
    loop {
        let noise: Vec<Vec3> = if noisy {
            (0..base.vertices.len())
                .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)])
                .collect()
        } else {
            Vec::new()
        };
        let sk = perturb(&base, [a, 0.0], &noise, None);
        match featurize(&sk) {
            Ok(f) => return Ok(Sample { label, vertices: sk.vertices, features: f.qs }),
            Err(Error::DegenerateEdge { .. }) if noisy => continue,
            Err(e) => return Err(e),
        }
    }
}

pub fn generate_dataset(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let train = (0..config.n_train).map(|i| generate_sample(config, Split::Train, i)).collect::<Result<_>>()?;
    let test = (0..config.n_test).map(|i| generate_sample(config, Split::Test, i)).collect::<Result<_>>()?;
    Ok(Dataset { config: config.clone(), train, test })
}

/// Samples per label.
pub fn class_histogram(samples: &[Sample], classes: usize) -> Vec<usize> {
    let mut h = alloc::vec![0; classes];
    for s in samples {
        h[s.label] += 1;
    }
    h
}
