//! Bayesian inference for combinatorial responses.
//!
//! A binary response vector `y` is modelled as the maximizer of a linear
//! program `max ζ'z` over `z ∈ [0,1]^d, Az ≤ b`, where the latent `ζ` is
//! Gaussian with a regression mean. When the constraint polyhedron is
//! integral the continuous LP returns binary vertices, and the LP dual gives
//! a thresholding representation of `y` in terms of `ζ` that a Gibbs sampler
//! can exploit.
//!
//! Module map:
//!
//! * [`constraints`]: constraint systems, total unimodularity, integrality.
//! * [`transform`]: the LP transform `T(ζ)` and its dual certificate.
//! * [`polytope`]: the dual polytope `U(y, ζ)` and samplers for `u`.
//! * [`distributions`]: random variates and the normal CDF.
//! * [`mcmc`]: Gibbs samplers for the regression, intercept-only and
//!   hierarchical models.
//! * [`inference`]: posterior prediction and diagnostics.
//!
//! The accompanying guide in `book/` walks through each piece.

pub mod constraints;
pub mod distributions;
pub mod duck;
pub mod error;
pub mod inference;
pub mod lp;
pub mod mcmc;
pub mod polytope;
pub mod simulate;
pub mod transform;

pub use constraints::{BipartiteGraph, ConstraintSystem};
pub use error::{Error, Result};
pub use transform::{solve_transform, TransformResult};

/// Feasibility and duality tolerance shared by the LP, the transform and the
/// certificate checks.
pub const TOLERANCE: f64 = 1e-9;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/transform.md")]
    mod transform {}
    #[doc = include_str!("../../../book/src/dual_polytope.md")]
    mod dual_polytope {}
    #[doc = include_str!("../../../book/src/gibbs.md")]
    mod gibbs {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/hierarchical.md")]
    mod hierarchical {}
}
