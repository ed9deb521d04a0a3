//! Central numerical tolerances.
//!
//! Every threshold used by the library lives here. Functions that need a
//! tolerance read it from a [`Tolerances`] value, so callers can override the
//! defaults without touching the algorithms.

use serde::{Deserialize, Serialize};

/// Relative symmetry tolerance for SPD and tangent matrices.
pub const SYMMETRY_REL: f64 = 1e-12;

/// Smallest admissible ratio of smallest to largest eigenvalue of an SPD matrix.
pub const MIN_EIGEN_RATIO: f64 = 1e-12;

/// Roundtrip tolerance for exp/log, transport and other exact identities.
pub const ROUNDTRIP: f64 = 1e-9;

/// Isometry tolerance for vectorization.
pub const ISOMETRY: f64 = 1e-10;

/// Reciprocal condition number below which the total scatter is singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Absolute tolerance on the scatter decomposition `T = B + W`.
pub const DECOMPOSITION: f64 = 1e-9;

/// Group Fréchet variance spreads at or below this are degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-14;

/// Default gradient-norm tolerance for Fréchet means.
pub const MEAN_TOL: f64 = 1e-10;

/// Gradient-norm tolerance for the means entering the scatter matrices.
///
/// The cross term of the decomposition is `v (Σ u)ᵀ`, so the within-group
/// centering has to be much tighter than [`DECOMPOSITION`] divided by the
/// group size.
pub const TEST_MEAN_TOL: f64 = 1e-12;

/// Default iteration cap for Fréchet means.
pub const MEAN_MAX_ITER: usize = 200;

/// Armijo sufficient-decrease constant for geodesic regression.
pub const ARMIJO: f64 = 1e-4;

/// Overridable bundle of the constants above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub symmetry_rel: f64,
    pub min_eigen_ratio: f64,
    pub roundtrip: f64,
    pub singular_rcond: f64,
    pub decomposition: f64,
    pub degenerate_variance: f64,
    pub mean_tol: f64,
    pub test_mean_tol: f64,
    pub mean_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symmetry_rel: SYMMETRY_REL,
            min_eigen_ratio: MIN_EIGEN_RATIO,
            roundtrip: ROUNDTRIP,
            singular_rcond: SINGULAR_RCOND,
            decomposition: DECOMPOSITION,
            degenerate_variance: DEGENERATE_VARIANCE,
            mean_tol: MEAN_TOL,
            test_mean_tol: TEST_MEAN_TOL,
            mean_max_iter: MEAN_MAX_ITER,
        }
    }
}
