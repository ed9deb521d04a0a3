//! Tests of equal Fréchet means for groups of symmetric positive definite
//! matrices under the affine-invariant metric.
//!
//! [`inference::riemannian_manova`] applies Wilks' Lambda to tangent-space
//! coordinates of log-residuals; [`inference::frechet_anova`] uses geodesic
//! distances only. [`simulation`] calibrates both by Monte Carlo.

// `!(x > t)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod geometry;
pub mod inference;
pub mod normal;
pub mod rng;
mod serde_util;
pub mod simulation;
pub mod tolerances;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/normal.md")]
    mod normal {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/manova.md")]
    mod manova {}
    #[doc = include_str!("../../../book/src/frechet_anova.md")]
    mod frechet_anova {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
