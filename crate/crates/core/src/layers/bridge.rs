//! Maps from QPU outputs to real features.

use alloc::vec::Vec;

use libm::sqrt;

use crate::quat::{angle_axis_map, dot, norm, Quaternion, AXIS_EPS, CLAMP_EPS};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BridgeMode {
    /// Real parts only; rotation-invariant.
    KeepReal,
    /// Imaginary parts only; rotation-equivariant.
    KeepImaginary,
    /// All four components.
    Flatten4,
    /// `[arccos(s), v/‖v‖]` per quaternion.
    #[default]
    AngleAxis,
}

impl BridgeMode {
    pub const ALL: [BridgeMode; 4] =
        [BridgeMode::KeepReal, BridgeMode::KeepImaginary, BridgeMode::Flatten4, BridgeMode::AngleAxis];

    /// Real outputs per input quaternion.
    pub fn width_per_quaternion(self) -> usize {
        match self {
            BridgeMode::KeepReal => 1,
            BridgeMode::KeepImaginary => 3,
            BridgeMode::Flatten4 | BridgeMode::AngleAxis => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BridgeMode::KeepReal => "keep-real",
            BridgeMode::KeepImaginary => "keep-imaginary",
            BridgeMode::Flatten4 => "flatten4",
            BridgeMode::AngleAxis => "angle-axis",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

pub fn bridge_forward(mode: BridgeMode, ys: &[Quaternion]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ys.len() * mode.width_per_quaternion());
    for q in ys {
        match mode {
            BridgeMode::KeepReal => out.push(q.s),
            BridgeMode::KeepImaginary => out.extend_from_slice(&q.v),
            BridgeMode::Flatten4 => out.extend_from_slice(&q.to_array()),
            BridgeMode::AngleAxis => {
                let (angle, axis) = angle_axis_map(*q);
                out.push(angle);
                out.extend_from_slice(&axis);
            }
        }
    }
    out
}

/// Pulls a gradient on the bridge output back onto the quaternions.
pub fn bridge_backward(mode: BridgeMode, ys: &[Quaternion], upstream: &[f64]) -> Vec<[f64; 4]> {
    let w = mode.width_per_quaternion();
    assert_eq!(upstream.len(), ys.len() * w, "bridge upstream width");
    ys.iter()
        .zip(upstream.chunks_exact(w))
        .map(|(q, g)| match mode {
            BridgeMode::KeepReal => [g[0], 0.0, 0.0, 0.0],
            BridgeMode::KeepImaginary => [0.0, g[0], g[1], g[2]],
            BridgeMode::Flatten4 => [g[0], g[1], g[2], g[3]],
            BridgeMode::AngleAxis => angle_axis_backward(*q, [g[0], g[1], g[2], g[3]]),
        })
        .collect()
}

// Clamped region: zero derivative through arccos. No axis: zero gradient.
fn angle_axis_backward(q: Quaternion, g: [f64; 4]) -> [f64; 4] {
    let n = norm(q.v);
    if n <= AXIS_EPS {
        return [0.0; 4];
    }
    let inside = q.s > -1.0 + CLAMP_EPS && q.s < 1.0 - CLAMP_EPS;
    let ds = if inside { -g[0] / sqrt(1.0 - q.s * q.s) } else { 0.0 };
    let u = [q.v[0] / n, q.v[1] / n, q.v[2] / n];
    let gu = [g[1], g[2], g[3]];
    let p = dot(gu, u);
    [ds, (gu[0] - p * u[0]) / n, (gu[1] - p * u[1]) / n, (gu[2] - p * u[2]) / n]
}
