//! Online continual learning with experience replay, repeated rehearsal and
//! repeated augmented rehearsal on small dense networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense networks, losses, exact gradients and SGD.
//! - [`stream`]: class-incremental task streams consumed once.
//! - [`memory`]: reservoir memory with random and MIR retrieval.
//! - [`augment`]: (P, Q) augmentation and finite transform groups.
//! - [`rehearsal`]: the ER / repeated ER / RAR training loops.
//! - [`tuner`]: bootstrapped-policy-gradient bandit over (K, P, Q).
//! - [`analysis`]: accuracy metrics, loss landscapes and Monte-Carlo checks
//!   of the biased rehearsal risk.
//! - [`harness`]: configuration, run orchestration and the `ocl` CLI.

pub mod analysis;
pub mod augment;
pub mod error;
pub mod harness;
pub mod memory;
pub mod nn;
pub mod rehearsal;
pub mod stream;
pub mod tuner;

pub use error::{Error, Result};
