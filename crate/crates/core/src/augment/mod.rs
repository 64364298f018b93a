//! Data augmentation: a random (P, Q) policy for training and exact finite
//! transform groups for orbit averaging.

mod group;
mod ops;
mod policy;

pub use group::{group_orbit_losses, FiniteGroup, GroupElement, OrbitLosses};
pub use ops::{OpDomain, TransformOp, MAX_MAGNITUDE, VECTOR_NOISE_AT_MAX};
pub use policy::{rand_augment_batch, AugPolicy, AugTarget, DEFAULT_P, DEFAULT_Q};
