//! Hypothesis tests for equality of group Fréchet means: the Riemannian
//! Wilks' Lambda MANOVA and the Fréchet ANOVA, their noncentralities under
//! local alternatives, and the χ² numerics behind the p-values.

mod chi2;
mod frechet;
mod manova;
mod noncentrality;

pub use chi2::{chi_square_cdf, chi_square_quantile, chi_square_sf, noncentral_chi_square_sf};
pub use frechet::{frechet_anova, frechet_anova_components, FrechetAnovaComponents, FrechetAnovaResult};
pub use manova::{riemannian_manova, wilks_lambda, GroupVector, ManovaResult, WilksDecomposition};
pub use noncentrality::{noncentrality_frechet, noncentrality_novel};
