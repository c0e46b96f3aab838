//! Quaternion algebra and the quaternion/rotation correspondence.
//!
//! Quaternions are stored in scalar/vector form `[s, (x, y, z)]`. Unit
//! quaternions encode rotations; `q` and `-q` encode the same rotation and
//! [`normalize_canonical`] picks the representative with a non-negative real
//! part.

use core::ops::{Add, Mul, Neg, Sub};

use libm::{acos, atan2, cos, sin, sqrt};

use crate::error::{Error, Result};

/// Clamp margin applied to the real part before `arccos`.
pub const CLAMP_EPS: f64 = 1e-6;

/// Imaginary parts with norm at or below this are treated as having no axis.
pub const AXIS_EPS: f64 = 1e-12;

/// Plain 3-vector.
pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    sqrt(dot(a, a))
}

#[inline]
pub fn scale(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

#[inline]
pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Clamps a real part into `[-1 + CLAMP_EPS, 1 - CLAMP_EPS]`.
#[inline]
pub fn clamp_real(s: f64) -> f64 {
    s.clamp(-1.0 + CLAMP_EPS, 1.0 - CLAMP_EPS)
}

/// A quaternion `[s, v]` with real part `s` and imaginary part `v`.
#[derive(Copy, Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quaternion {
    pub s: f64,
    pub v: Vec3,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { s: 1.0, v: [0.0; 3] };
    pub const ZERO: Quaternion = Quaternion { s: 0.0, v: [0.0; 3] };

    #[inline]
    pub const fn new(s: f64, x: f64, y: f64, z: f64) -> Self {
        Self { s, v: [x, y, z] }
    }

    /// Pure quaternion `[0, p]`.
    #[inline]
    pub const fn pure(p: Vec3) -> Self {
        Self { s: 0.0, v: p }
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> Self {
        Self { s: a[0], v: [a[1], a[2], a[3]] }
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.s, self.v[0], self.v[1], self.v[2]]
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.s * self.s + dot(self.v, self.v)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        sqrt(self.norm_squared())
    }

    #[inline]
    pub fn conjugate(self) -> Self {
        conjugate(self)
    }

    #[inline]
    pub fn is_unit(self, tol: f64) -> bool {
        (self.norm_squared() - 1.0).abs() <= tol
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.s.is_finite() && self.v.iter().all(|c| c.is_finite())
    }

    /// Scales to unit norm without touching the sign.
    #[inline]
    pub fn normalized(self) -> Self {
        let n = self.norm();
        self * (1.0 / n)
    }

    /// Largest absolute component-wise difference.
    pub fn max_abs_diff(self, other: Self) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    #[inline]
    fn mul(self, rhs: Quaternion) -> Quaternion {
        hamilton(self, rhs)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;

    #[inline]
    fn mul(self, k: f64) -> Quaternion {
        Quaternion { s: self.s * k, v: scale(self.v, k) }
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    #[inline]
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion { s: self.s + rhs.s, v: add3(self.v, rhs.v) }
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;

    #[inline]
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion { s: self.s - rhs.s, v: sub3(self.v, rhs.v) }
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    #[inline]
    fn neg(self) -> Quaternion {
        Quaternion { s: -self.s, v: scale(self.v, -1.0) }
    }
}

/// Hamilton product `q1 ⊗ q2 = [s1 s2 - <v1, v2>, v1 × v2 + s1 v2 + s2 v1]`.
#[inline]
pub fn hamilton(q1: Quaternion, q2: Quaternion) -> Quaternion {
    let (a, b) = (q1, q2);
    Quaternion {
        s: a.s * b.s - a.v[0] * b.v[0] - a.v[1] * b.v[1] - a.v[2] * b.v[2],
        v: [
            a.s * b.v[0] + a.v[0] * b.s + a.v[1] * b.v[2] - a.v[2] * b.v[1],
            a.s * b.v[1] - a.v[0] * b.v[2] + a.v[1] * b.s + a.v[2] * b.v[0],
            a.s * b.v[2] + a.v[0] * b.v[1] - a.v[1] * b.v[0] + a.v[2] * b.s,
        ],
    }
}

#[inline]
pub fn conjugate(q: Quaternion) -> Quaternion {
    Quaternion { s: q.s, v: [-q.v[0], -q.v[1], -q.v[2]] }
}

/// 4×4 matrix representing left or right Hamilton multiplication.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ProductMatrix(pub [[f64; 4]; 4]);

impl ProductMatrix {
    pub fn mul_vec(&self, r: [f64; 4]) -> [f64; 4] {
        let m = &self.0;
        core::array::from_fn(|i| m[i][0] * r[0] + m[i][1] * r[1] + m[i][2] * r[2] + m[i][3] * r[3])
    }

    /// `Mᵀ r`.
    pub fn transpose_mul_vec(&self, r: [f64; 4]) -> [f64; 4] {
        let m = &self.0;
        core::array::from_fn(|j| m[0][j] * r[0] + m[1][j] * r[1] + m[2][j] * r[2] + m[3][j] * r[3])
    }

    pub fn transpose(&self) -> ProductMatrix {
        ProductMatrix(core::array::from_fn(|i| core::array::from_fn(|j| self.0[j][i])))
    }

    pub fn matmul(&self, other: &ProductMatrix) -> ProductMatrix {
        ProductMatrix(core::array::from_fn(|i| {
            core::array::from_fn(|j| (0..4).map(|k| self.0[i][k] * other.0[k][j]).sum())
        }))
    }
}

/// Returns `(M_L(q), M_R(q))` with `M_L(q) r = q ⊗ r` and `M_R(q) r = r ⊗ q`.
pub fn product_matrices(q: Quaternion) -> (ProductMatrix, ProductMatrix) {
    let (s, [x, y, z]) = (q.s, q.v);
    let left = ProductMatrix([
        [s, -x, -y, -z],
        [x, s, -z, y],
        [y, z, s, -x],
        [z, -y, x, s],
    ]);
    let right = ProductMatrix([
        [s, -x, -y, -z],
        [x, s, z, -y],
        [y, -z, s, x],
        [z, y, -x, s],
    ]);
    (left, right)
}

/// Quaternion power: scales the rotation angle of a unit quaternion by `w`.
///
/// The real part is clamped before `arccos`; a quaternion without an axis
/// maps to the identity.
pub fn qpow(q: Quaternion, w: f64) -> Quaternion {
    let n = norm(q.v);
    if n <= AXIS_EPS {
        return Quaternion::IDENTITY;
    }
    let angle = w * acos(clamp_real(q.s));
    Quaternion { s: cos(angle), v: scale(q.v, sin(angle) / n) }
}

/// Rotates `p` by unit `q` via `q ⊗ [0, p] ⊗ q*`.
pub fn rotate_vector(q: Quaternion, p: Vec3) -> Vec3 {
    hamilton(hamilton(q, Quaternion::pure(p)), conjugate(q)).v
}

/// Unit quaternion rotating the direction of `v1` onto the direction of `v2`.
///
/// The result has a non-negative real part. Parallel inputs give the identity;
/// anti-parallel inputs give a half-turn about the axis `v1 × e`, where `e` is
/// the standard basis vector least aligned with `v1`.
pub fn from_two_vectors(v1: Vec3, v2: Vec3) -> Result<Quaternion> {
    let (n1, n2) = (norm(v1), norm(v2));
    if !(n1 > 0.0 && n2 > 0.0) || !n1.is_finite() || !n2.is_finite() {
        return Err(Error::Domain("from_two_vectors: zero-length input"));
    }
    let a = scale(v1, 1.0 / n1);
    let b = scale(v2, 1.0 / n2);
    let c = cross(a, b);
    let cn = norm(c);
    let d = dot(a, b);
    if cn <= AXIS_EPS {
        if d > 0.0 {
            return Ok(Quaternion::IDENTITY);
        }
        let axis = cross(a, least_aligned_basis(a));
        let q = Quaternion::pure(scale(axis, 1.0 / norm(axis)));
        return normalize_canonical(q);
    }
    // atan2 keeps the angle accurate near 0 and π, where arccos of the
    // normalized inner product loses digits.
    let half = 0.5 * atan2(cn, d);
    let u = scale(c, 1.0 / cn);
    Ok(Quaternion { s: cos(half), v: scale(u, sin(half)) })
}

fn least_aligned_basis(a: Vec3) -> Vec3 {
    let abs = [a[0].abs(), a[1].abs(), a[2].abs()];
    let mut idx = 0;
    for i in 1..3 {
        if abs[i] < abs[idx] {
            idx = i;
        }
    }
    let mut e = [0.0; 3];
    e[idx] = 1.0;
    e
}

/// Unit-norm representative with `s ≥ 0`; when `s == 0` the first nonzero
/// imaginary component is made positive.
pub fn normalize_canonical(q: Quaternion) -> Result<Quaternion> {
    let n = q.norm();
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::Domain("normalize_canonical: zero quaternion"));
    }
    let u = q * (1.0 / n);
    let flip = if u.s != 0.0 {
        u.s < 0.0
    } else {
        u.v.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
    };
    let mut out = if flip { -u } else { u };
    out.s += 0.0; // no negative zero
    Ok(out)
}

/// `[arccos(s), v / ‖v‖]`: angle and axis kept apart.
///
/// The angle is `arccos` of the real part itself (half the rotation angle of
/// a unit quaternion). Without an axis the result is `(arccos(s), 0)` with `s`
/// clipped to `[-1, 1]` only, so the identity maps to `(0, 0)`.
pub fn angle_axis_map(q: Quaternion) -> (f64, Vec3) {
    let n = norm(q.v);
    if n <= AXIS_EPS {
        return (acos(q.s.clamp(-1.0, 1.0)), [0.0; 3]);
    }
    (acos(clamp_real(q.s)), scale(q.v, 1.0 / n))
}

/// Rotation angle in `[0, π]` about a unit axis.
#[derive(Copy, Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AngleAxis {
    pub theta: f64,
    pub axis: Vec3,
}

impl AngleAxis {
    /// Normalizes `axis`; fails on a zero axis.
    pub fn new(theta: f64, axis: Vec3) -> Result<Self> {
        let n = norm(axis);
        if n.is_nan() || n <= 0.0 {
            return Err(Error::Domain("AngleAxis: zero axis"));
        }
        Ok(Self { theta, axis: scale(axis, 1.0 / n) })
    }

    /// `[cos(θ/2), sin(θ/2) u]`.
    pub fn to_quaternion(self) -> Quaternion {
        let half = 0.5 * self.theta;
        Quaternion { s: cos(half), v: scale(self.axis, sin(half)) }
    }

    /// Rotation encoded by a unit quaternion, canonicalized so that
    /// `theta ∈ [0, π]`. The identity yields a zero axis.
    pub fn from_quaternion(q: Quaternion) -> Result<Self> {
        let q = normalize_canonical(q)?;
        let n = norm(q.v);
        if n <= AXIS_EPS {
            return Ok(Self { theta: 0.0, axis: [0.0; 3] });
        }
        Ok(Self { theta: 2.0 * atan2(n, q.s), axis: scale(q.v, 1.0 / n) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn identity_is_neutral() {
        let q = Quaternion::new(0.3, -0.2, 0.9, 0.1);
        assert_eq!(Quaternion::IDENTITY * q, q);
        assert_eq!(q * Quaternion::IDENTITY, q);
    }

    #[test]
    fn ij_is_k() {
        let i = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        let j = Quaternion::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(i * j, Quaternion::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(j * i, Quaternion::new(0.0, 0.0, 0.0, -1.0));
    }

    #[test]
    fn unit_times_conjugate_is_identity() {
        let q = Quaternion::new(0.5, 0.5, -0.5, 0.5);
        assert!(close(q * q.conjugate(), Quaternion::IDENTITY, 1e-15));
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(conjugate(Quaternion::IDENTITY), Quaternion::IDENTITY);
        let q = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        assert_eq!(conjugate(q), Quaternion::new(0.5, -0.5, -0.5, -0.5));
        assert_eq!(conjugate(conjugate(q)), q);
    }

    #[test]
    fn product_matrices_of_identity() {
        let (l, r) = product_matrices(Quaternion::IDENTITY);
        let eye = ProductMatrix(core::array::from_fn(|i| {
            core::array::from_fn(|j| if i == j { 1.0 } else { 0.0 })
        }));
        assert_eq!(l, eye);
        assert_eq!(r, eye);
    }

    #[test]
    fn qpow_examples() {
        let q = AngleAxis::new(1.1, [1.0, 2.0, -0.5]).unwrap().to_quaternion();
        assert!(close(qpow(q, 1.0), q, 1e-9));
        assert_eq!(qpow(q, 0.0), Quaternion::IDENTITY);

        let theta = FRAC_PI_3;
        let q = Quaternion { s: cos(theta / 2.0), v: [0.0, 0.0, sin(theta / 2.0)] };
        let expect = Quaternion { s: cos(theta), v: [0.0, 0.0, sin(theta)] };
        assert!(close(qpow(q, 2.0), expect, 1e-12));
    }

    #[test]
    fn qpow_without_axis_is_identity() {
        assert_eq!(qpow(Quaternion::IDENTITY, 3.7), Quaternion::IDENTITY);
        assert_eq!(qpow(-Quaternion::IDENTITY, 0.5), Quaternion::IDENTITY);
    }

    #[test]
    fn rotate_vector_examples() {
        let p = [0.3, -1.2, 2.0];
        assert_eq!(rotate_vector(Quaternion::IDENTITY, p), p);

        let q = AngleAxis::new(PI / 2.0, [0.0, 0.0, 1.0]).unwrap().to_quaternion();
        let r = rotate_vector(q, [1.0, 0.0, 0.0]);
        assert!(norm(sub3(r, [0.0, 1.0, 0.0])) < 1e-15);

        let back = rotate_vector(q.conjugate(), rotate_vector(q, p));
        assert!(norm(sub3(back, p)) < 1e-14);
    }

    #[test]
    fn from_two_vectors_quarter_turn() {
        let q = from_two_vectors([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        let h = FRAC_PI_4;
        assert!(close(q, Quaternion { s: cos(h), v: [0.0, 0.0, sin(h)] }, 1e-15));
    }

    #[test]
    fn from_two_vectors_parallel_and_antiparallel() {
        let q = from_two_vectors([2.0, 0.0, 0.0], [0.5, 0.0, 0.0]).unwrap();
        assert_eq!(q, Quaternion::IDENTITY);

        let q = from_two_vectors([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(q.s, 0.0);
        // x is least aligned with y and z; ties break to the lowest index, so
        // e = y and the axis is x × y = z.
        assert_eq!(q.v, [0.0, 0.0, 1.0]);
        let r = rotate_vector(q, [1.0, 0.0, 0.0]);
        assert!(norm(sub3(r, [-1.0, 0.0, 0.0])) < 1e-15);

        let v = [0.3, -0.4, 1.2];
        let q = from_two_vectors(v, scale(v, -2.0)).unwrap();
        let r = rotate_vector(q, scale(v, 1.0 / norm(v)));
        assert!(norm(add3(r, scale(v, 1.0 / norm(v)))) < 1e-12);
        assert!(q.s >= 0.0);
    }

    #[test]
    fn from_two_vectors_rejects_zero() {
        assert!(from_two_vectors([0.0; 3], [1.0, 0.0, 0.0]).is_err());
        assert!(from_two_vectors([1.0, 0.0, 0.0], [0.0; 3]).is_err());
    }

    #[test]
    fn normalize_canonical_examples() {
        let n = |q| normalize_canonical(q).unwrap();
        assert_eq!(n(Quaternion::new(-1.0, 0.0, 0.0, 0.0)), Quaternion::IDENTITY);
        assert_eq!(n(Quaternion::new(2.0, 0.0, 0.0, 0.0)), Quaternion::IDENTITY);
        assert_eq!(n(Quaternion::new(0.0, -1.0, 0.0, 0.0)), Quaternion::new(0.0, 1.0, 0.0, 0.0));
        let q = n(Quaternion::new(0.0, 0.0, -3.0, 4.0));
        assert!(q.max_abs_diff(Quaternion::new(0.0, 0.0, 0.6, -0.8)) < 1e-15);
        assert!(q.s.is_sign_positive());
        assert!(normalize_canonical(Quaternion::ZERO).is_err());
    }

    #[test]
    fn angle_axis_map_examples() {
        let h = FRAC_PI_4;
        let (a, u) = angle_axis_map(Quaternion { s: cos(h), v: [0.0, 0.0, sin(h)] });
        assert!((a - FRAC_PI_4).abs() < 1e-15);
        assert!(norm(sub3(u, [0.0, 0.0, 1.0])) < 1e-15);

        assert_eq!(angle_axis_map(Quaternion::IDENTITY), (0.0, [0.0; 3]));
    }

    #[test]
    fn angle_axis_type_round_trip() {
        let aa = AngleAxis::new(2.5, [0.0, -3.0, 4.0]).unwrap();
        let back = AngleAxis::from_quaternion(aa.to_quaternion()).unwrap();
        assert!((back.theta - 2.5).abs() < 1e-12);
        assert!(norm(sub3(back.axis, aa.axis)) < 1e-12);
    }
}
