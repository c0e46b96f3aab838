//! Quaternion product units (QPUs) for rotation-aware neural networks.
//!
//! A QPU takes a set of unit quaternions, raises each to a learned power and
//! multiplies the results with Hamilton products. Its output is again a unit
//! quaternion whose real part is invariant, and whose imaginary part is
//! equivariant, under a common rotation of the inputs' axes.
//!
//! * [`quat`]: quaternion algebra.
//! * [`qpu`]: the unit, its chain product (sequential and pairwise tree) and
//!   the backward pass.
//! * [`layers`]: QPU fully-connected and aggregation layers, bridges to real
//!   features, dense layers and the model graph.
//! * [`cubeedge`]: the CubeEdge synthetic skeleton dataset.
//! * [`optim`]: SGD and Adam.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod cubeedge;
pub mod error;
pub mod grad;
pub mod layers;
pub mod opcount;
pub mod optim;
pub mod qpu;
pub mod quat;

pub use error::{Error, Result};
pub use quat::Quaternion;
