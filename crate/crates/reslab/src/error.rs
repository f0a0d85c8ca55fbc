use num_complex::Complex64;
use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Evaluation too close to a pole of the requested quantity.
    #[error("evaluation within {distance:e} of the pole at s = {location}")]
    Pole { location: Complex64, distance: f64 },

    /// An iterative scheme failed to reach the requested tolerance.
    #[error("no convergence in {context}: reached {achieved:e}, wanted {wanted:e}")]
    Convergence {
        context: &'static str,
        achieved: f64,
        wanted: f64,
    },

    /// Intermediate quantity left the representable range.
    #[error("overflow in {context}")]
    Overflow { context: &'static str },

    /// Input outside the documented domain of the chosen method.
    #[error("off-domain input: {what}")]
    OffDomain { what: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Translation vectors do not span a full-rank lattice.
    #[error("translation lattice is rank deficient")]
    RankDeficient,

    /// More rotation planes than the fiber can hold (2t > d).
    #[error("{planes} rotation planes need {} fiber dimensions, only {fiber_dim} available", 2 * planes)]
    PlaneOverflow { planes: usize, fiber_dim: usize },

    #[error("cannot parse angle {input:?}")]
    AngleParse { input: String },

    /// Predicted output size exceeds the configured cap.
    #[error("enumeration would produce about {predicted} items, cap is {cap}")]
    ExplosionGuard { predicted: u64, cap: u64 },

    #[error("grid of {points} points is too coarse (need at least {min})")]
    GridTooCoarse { points: usize, min: usize },

    /// Working precision cannot resolve the requested quantity.
    #[error("precision exhausted: need about {needed_bits} bits, have {have_bits}")]
    PrecisionExhausted { needed_bits: u64, have_bits: u64 },

    #[error("empty input")]
    EmptyInput,

    /// A zero-counting contour passes through (or too near) a zero.
    #[error("contour passes through a zero: min/max |f| ratio {ratio:e}")]
    ContourThroughZero { ratio: f64 },

    /// Canonical-product cutoff below the validity threshold of its tail bound.
    #[error("k_max = {k_max} too small, need at least {required}")]
    TruncationTooSmall { k_max: u64, required: u64 },
}
