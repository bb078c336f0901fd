//! Training-free function approximation on unknown low-dimensional manifolds.
//!
//! The estimator averages noisy samples against a localized kernel built
//! from even Hermite functions. Equivalent shallow Gaussian networks and
//! DAG-composed deep networks are synthesized from the same kernels without
//! any optimization.

pub mod error;
pub mod deep_net;
pub mod estimator;
pub mod gaussian_net;
pub mod hermite;
pub mod kernels;
pub mod multi_index;
pub mod special;

pub use error::{Error, Result};
