//! Location and dispersion estimators on the SPD manifold, plus geodesic
//! regression.

mod regression;

pub use regression::{geodesic_regression, regression_dispersion, RegressionModel};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    squared_distance_unchecked, sym_eigen, sym_fn, tangent_dim, unwhiten, vec_identity_unchecked,
    whitened_log, SpdMatrix,
};
use crate::normal::Dispersion;

/// One labelled group of observations.
#[derive(Clone, Debug)]
pub struct Group {
    pub label: String,
    pub observations: Vec<SpdMatrix>,
}

/// `g` ordered groups of SPD observations sharing one dimension `p`.
#[derive(Clone, Debug)]
pub struct GroupedSample {
    groups: Vec<Group>,
    p: usize,
}

impl GroupedSample {
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        let first = groups
            .first()
            .and_then(|g| g.observations.first())
            .ok_or_else(|| Error::usage("a grouped sample needs at least one non-empty group"))?;
        let p = first.dim();
        for g in &groups {
            if g.observations.is_empty() {
                return Err(Error::usage(format!("group '{}' is empty", g.label)));
            }
            if let Some(bad) = g.observations.iter().find(|c| c.dim() != p) {
                return Err(Error::usage(format!(
                    "group '{}' mixes dimensions {p} and {}",
                    g.label,
                    bad.dim()
                )));
            }
        }
        Ok(GroupedSample { groups, p })
    }

    /// Groups labelled `"1"`, `"2"`, ... in order.
    pub fn from_groups(groups: Vec<Vec<SpdMatrix>>) -> Result<Self> {
        Self::new(
            groups
                .into_iter()
                .enumerate()
                .map(|(i, observations)| Group {
                    label: (i + 1).to_string(),
                    observations,
                })
                .collect(),
        )
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Number of groups `g`.
    pub fn g(&self) -> usize {
        self.groups.len()
    }

    /// Total sample size `n`.
    pub fn n(&self) -> usize {
        self.groups.iter().map(|g| g.observations.len()).sum()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Tangent dimension `d = p(p+1)/2`.
    pub fn d(&self) -> usize {
        tangent_dim(self.p)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.observations.len()).collect()
    }

    /// `λ_l = n_l / n`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.sizes().into_iter().map(|s| s as f64 / n).collect()
    }

    /// All observations in group order.
    pub fn pooled(&self) -> Vec<SpdMatrix> {
        self.groups
            .iter()
            .flat_map(|g| g.observations.iter().cloned())
            .collect()
    }
}

/// Convergence report of an iterative estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
}

/// Sample Fréchet mean by the fixed-point iteration
/// `X ← exp_X((1/n) Σ log_X(C_i))`, started at the arithmetic mean.
///
/// Stops when `‖(1/n) Σ log_X(C_i)‖_X ≤ tol`. Hitting `max_iter` is not an
/// error: the last iterate is returned with `converged = false`.
pub fn frechet_mean(
    sample: &[SpdMatrix],
    tol: f64,
    max_iter: usize,
) -> Result<(SpdMatrix, FitDiagnostics)> {
    let w = vec![1.0; sample.len()];
    weighted_frechet_mean(sample, &w, tol, max_iter)
}

/// Weighted Fréchet mean, `argmin_X Σ w_i d²(X, C_i)`; weights are normalized.
pub fn weighted_frechet_mean(
    points: &[SpdMatrix],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(SpdMatrix, FitDiagnostics)> {
    let first = points
        .first()
        .ok_or_else(|| Error::usage("Fréchet mean of an empty sample"))?;
    if weights.len() != points.len() {
        return Err(Error::usage("one weight per point is required"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::usage("weights must be non-negative with a positive sum"));
    }
    if !(tol > 0.0) {
        return Err(Error::usage(format!("tolerance must be positive, got {tol}")));
    }
    let p = first.dim();
    if points.iter().any(|c| c.dim() != p) {
        return Err(Error::usage("points of different dimensions"));
    }
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();

    let mut start = DMatrix::zeros(p, p);
    for (c, wi) in points.iter().zip(&w) {
        start += c.matrix() * *wi;
    }
    let mut x = SpdMatrix::from_computed(start)?;
    let mut diag = FitDiagnostics {
        iterations: 0,
        final_gradient_norm: f64::INFINITY,
        converged: false,
    };
    loop {
        let mut step = DMatrix::zeros(p, p);
        for (c, wi) in points.iter().zip(&w) {
            if *wi > 0.0 {
                step += whitened_log(&x, c) * *wi;
            }
        }
        diag.final_gradient_norm = step.norm();
        if diag.final_gradient_norm <= tol {
            diag.converged = true;
            break;
        }
        if diag.iterations >= max_iter {
            break;
        }
        x = SpdMatrix::from_computed(unwhiten(&x, &sym_fn(&step, f64::exp)))?;
        diag.iterations += 1;
    }
    Ok((x, diag))
}

/// `σ̂² = (1/n) Σ d²(mean, C_i)`.
pub fn spherical_variance(sample: &[SpdMatrix], mean: &SpdMatrix) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::usage("spherical variance of an empty sample"));
    }
    check_dims(sample, mean)?;
    Ok(sample
        .iter()
        .map(|c| squared_distance_unchecked(mean, c))
        .sum::<f64>()
        / sample.len() as f64)
}

fn check_dims(sample: &[SpdMatrix], mean: &SpdMatrix) -> Result<()> {
    if sample.iter().any(|c| c.dim() != mean.dim()) {
        return Err(Error::usage("sample and mean have different dimensions"));
    }
    Ok(())
}

/// A sample covariance of tangent coordinates. It is positive semidefinite
/// but may be singular, which is flagged rather than treated as an error.
#[derive(Clone, Debug, Serialize)]
pub struct DispersionEstimate {
    #[serde(serialize_with = "crate::serde_util::matrix")]
    pub matrix: DMatrix<f64>,
    /// Smallest eigenvalue at or below `1e-12` times the largest (or all zero).
    pub singular: bool,
}

impl DispersionEstimate {
    pub(crate) fn from_coords(coords: &[DVector<f64>], d: usize) -> Result<Self> {
        let n = coords.len();
        if n < 2 {
            return Err(Error::usage(format!(
                "dispersion estimate needs at least 2 observations, got {n}"
            )));
        }
        let mut s = DMatrix::zeros(d, d);
        for x in coords {
            s.ger(1.0, x, x, 1.0);
        }
        s /= (n - 1) as f64;
        let (vals, _) = sym_eigen(&s);
        let singular = !(vals.min() > crate::tolerances::MIN_EIGEN_RATIO * vals.max());
        Ok(DispersionEstimate { matrix: s, singular })
    }

    /// Converts to a validated [`Dispersion`]; fails when singular.
    pub fn to_dispersion(&self) -> Result<Dispersion> {
        Dispersion::new(self.matrix.clone())
    }
}

/// `Ŝ_n = (1/(n−1)) Σ Vec_X(log_X(C_i)) Vec_X(log_X(C_i))ᵀ` with `X` the mean.
pub fn dispersion_estimate(sample: &[SpdMatrix], mean: &SpdMatrix) -> Result<DispersionEstimate> {
    check_dims(sample, mean)?;
    let coords: Vec<DVector<f64>> = sample
        .iter()
        .map(|c| vec_identity_unchecked(&whitened_log(mean, c)))
        .collect();
    DispersionEstimate::from_coords(&coords, tangent_dim(mean.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::max_abs;
    use std::f64::consts::E;

    fn s(x: f64) -> SpdMatrix {
        SpdMatrix::scalar(x).unwrap()
    }

    #[test]
    fn grouped_sample_contract() {
        assert!(GroupedSample::from_groups(vec![]).is_err());
        assert!(GroupedSample::from_groups(vec![vec![s(1.0)], vec![]]).is_err());
        assert!(GroupedSample::from_groups(vec![vec![s(1.0)], vec![SpdMatrix::identity(2)]]).is_err());
        let gs = GroupedSample::from_groups(vec![vec![s(1.0), s(2.0)], vec![s(3.0)]]).unwrap();
        assert_eq!((gs.g(), gs.n(), gs.p(), gs.d()), (2, 3, 1, 1));
        assert_eq!(gs.sizes(), vec![2, 1]);
        assert_eq!(gs.groups()[1].label, "2");
    }

    #[test]
    fn mean_of_single_point() {
        let c = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let (m, d) = frechet_mean(std::slice::from_ref(&c), 1e-10, 200).unwrap();
        assert!(max_abs(&(m.matrix() - c.matrix())) < 1e-14);
        assert!(d.converged);
    }

    #[test]
    fn scalar_mean_is_geometric() {
        let (m, _) = frechet_mean(&[s(1.0), s(E * E)], 1e-12, 200).unwrap();
        assert!((m.matrix()[(0, 0)] - E).abs() < 1e-12);
    }

    #[test]
    fn commuting_mean_is_diagonal_geometric() {
        let pts = [
            SpdMatrix::from_diagonal(&[1.0, 4.0, 0.5]).unwrap(),
            SpdMatrix::from_diagonal(&[2.0, 1.0, 0.25]).unwrap(),
            SpdMatrix::from_diagonal(&[8.0, 2.0, 3.0]).unwrap(),
        ];
        let (m, d) = frechet_mean(&pts, 1e-12, 200).unwrap();
        assert!(d.converged);
        for i in 0..3 {
            let g = (pts.iter().map(|c| c.matrix()[(i, i)].ln()).sum::<f64>() / 3.0).exp();
            assert!((m.matrix()[(i, i)] - g).abs() < 1e-11);
        }
    }

    #[test]
    fn nonconvergence_is_reported_not_raised() {
        let pts = [
            SpdMatrix::from_row_slice(2, &[3.0, 1.0, 1.0, 1.0]).unwrap(),
            SpdMatrix::from_row_slice(2, &[1.0, -0.5, -0.5, 4.0]).unwrap(),
        ];
        let (_, d) = frechet_mean(&pts, 1e-300, 3).unwrap();
        assert!(!d.converged);
        assert_eq!(d.iterations, 3);
        assert!(frechet_mean(&[], 1e-10, 10).unwrap_err().is_usage());
    }

    #[test]
    fn spherical_variance_examples() {
        let v = spherical_variance(&[s(E.recip()), s(E)], &s(1.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let c = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        assert!(spherical_variance(&[c.clone(), c.clone()], &c).unwrap() < 1e-28);
        assert!(spherical_variance(&[], &c).unwrap_err().is_usage());
    }

    #[test]
    fn dispersion_examples() {
        let est = dispersion_estimate(&[s(E.recip()), s(E)], &s(1.0)).unwrap();
        assert!((est.matrix[(0, 0)] - 2.0).abs() < 1e-14);
        let c = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let zero = dispersion_estimate(&[c.clone(), c.clone(), c.clone()], &c).unwrap();
        assert!(max_abs(&zero.matrix) < 1e-28);
        assert!(zero.singular);
        assert!(dispersion_estimate(std::slice::from_ref(&c), &c).unwrap_err().is_usage());
    }
}
