//! Resonance counting toolkit for hyperbolic cusp models.
//!
//! The crate computes the explicit objects attached to the model spaces
//! behind resonance-counting bounds on geometrically finite hyperbolic
//! manifolds: resolvent kernels on half-space models, cusp mode data and
//! their Bessel kernels, Diophantine growth functions of holonomy angles,
//! resonance counting curves, and a numerical verification harness for the
//! special-function estimates everything rests on.

pub mod cli;
pub mod counting;
pub mod cusp;
pub mod dioph;
pub mod error;
pub mod exact;
pub mod hyperbolic;
pub mod precision;
pub mod specfn;
pub mod verify;

pub use error::Error;
pub use precision::{PrecisionContext, PrecisionMode};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
