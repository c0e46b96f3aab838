//! Std companion to `qpu-core`: dataset and checkpoint files, a thread-pool
//! executor for the tree product, the training and evaluation harness, and
//! the pieces behind the `qpu` binary.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod format;
pub mod gradcheck;
pub mod invariance;
pub mod metrics;
pub mod parallel;
pub mod train;

pub use error::{Error, Result};
pub use parallel::Executor;
