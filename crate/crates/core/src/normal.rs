//! The Riemannian normal distribution `N(C*, Γ)`: `C` follows it when
//! `Vec_{C*}(log_{C*}(C)) ~ N(0, Γ)`.
//!
//! Sampling pushes a Gaussian tangent vector through the exponential map, so
//! it is exact; the density's normalizing constant is never needed.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    relative_symmetry_ok, sym_fn, tangent_dim, unvec_identity_unchecked, unwhiten,
    vec_identity_unchecked, whitened_log, SpdMatrix,
};
use crate::rng::keyed_rng;

/// A `d×d` SPD tangent-space covariance `Γ` with its cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct Dispersion {
    gamma: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl Dispersion {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() || gamma.nrows() == 0 {
            return Err(Error::usage("dispersion must be a non-empty square matrix"));
        }
        if !relative_symmetry_ok(&gamma) {
            return Err(Error::usage("dispersion must be symmetric"));
        }
        let gamma = (&gamma + gamma.transpose()) * 0.5;
        let chol = Cholesky::new(gamma.clone())
            .ok_or_else(|| Error::usage("dispersion is not positive definite"))?
            .l();
        Ok(Dispersion { gamma, chol })
    }

    /// `σ² I_d`.
    pub fn isotropic(d: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::usage(format!("isotropic variance must be positive, got {sigma2}")));
        }
        Self::new(DMatrix::identity(d, d) * sigma2)
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Lower-triangular `L` with `L Lᵀ = Γ`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn trace(&self) -> f64 {
        self.gamma.trace()
    }

    /// `xᵀ Γ⁻¹ x`.
    pub fn inverse_quadratic(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::usage(format!(
                "vector of length {} against a {}-dimensional dispersion",
                x.len(),
                self.dim()
            )));
        }
        let y = self
            .chol
            .solve_lower_triangular(x)
            .ok_or_else(|| Error::numeric("singular Cholesky factor"))?;
        Ok(y.norm_squared())
    }
}

impl Serialize for Dispersion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::serde_util::matrix(&self.gamma, s)
    }
}

/// `N(C*, Γ)` on the SPD manifold.
#[derive(Clone, Debug)]
pub struct RiemannianNormal {
    center: SpdMatrix,
    dispersion: Dispersion,
}

impl RiemannianNormal {
    pub fn new(center: SpdMatrix, dispersion: Dispersion) -> Result<Self> {
        let d = tangent_dim(center.dim());
        if dispersion.dim() != d {
            return Err(Error::usage(format!(
                "dispersion is {0}x{0} but p = {1} needs d = {d}",
                dispersion.dim(),
                center.dim()
            )));
        }
        Ok(RiemannianNormal { center, dispersion })
    }

    pub fn center(&self) -> &SpdMatrix {
        &self.center
    }

    pub fn dispersion(&self) -> &Dispersion {
        &self.dispersion
    }

    /// Draw number `index` under `seed`: `exp_{C*}(unvec_{C*}(L z))`, with `z`
    /// standard normal from the stream keyed by `(seed, index)`.
    pub fn draw(&self, seed: u64, index: u64) -> Result<SpdMatrix> {
        let mut rng = keyed_rng(seed, index);
        let d = self.dispersion.dim();
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let x = self.dispersion.cholesky_factor() * z;
        let w = unvec_identity_unchecked(&x, self.center.dim());
        SpdMatrix::from_computed(unwhiten(&self.center, &sym_fn(&w, f64::exp)))
            .map_err(|e| Error::numeric(format!("sampled point left the manifold: {e}")))
    }

    /// `n` draws with indices `0..n`; bit-for-bit reproducible for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<SpdMatrix>> {
        (0..n as u64).map(|i| self.draw(seed, i)).collect()
    }

    fn coords(&self, c: &SpdMatrix) -> Result<DVector<f64>> {
        if c.dim() != self.center.dim() {
            return Err(Error::usage(format!(
                "point is {0}x{0}, model is {1}x{1}",
                c.dim(),
                self.center.dim()
            )));
        }
        Ok(vec_identity_unchecked(&whitened_log(&self.center, c)))
    }

    /// `xᵀ Γ⁻¹ x` with `x = Vec_{C*}(log_{C*}(C))`.
    pub fn mahalanobis_sq(&self, c: &SpdMatrix) -> Result<f64> {
        self.dispersion.inverse_quadratic(&self.coords(c)?)
    }

    /// `−½ xᵀ Γ⁻¹ x`; the normalizing constant is omitted.
    pub fn log_density_unnormalized(&self, c: &SpdMatrix) -> Result<f64> {
        Ok(-0.5 * self.mahalanobis_sq(c)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    fn model_2x2(sigma2: f64) -> RiemannianNormal {
        let c = SpdMatrix::from_row_slice(2, &[2.0, 0.4, 0.4, 1.0]).unwrap();
        RiemannianNormal::new(c, Dispersion::isotropic(3, sigma2).unwrap()).unwrap()
    }

    #[test]
    fn dimension_contract() {
        let c = SpdMatrix::identity(2);
        assert!(RiemannianNormal::new(c, Dispersion::isotropic(2, 1.0).unwrap()).is_err());
        assert!(Dispersion::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(Dispersion::isotropic(3, 0.0).is_err());
    }

    #[test]
    fn cholesky_reproduces_gamma() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.7]);
        let disp = Dispersion::new(g.clone()).unwrap();
        let l = disp.cholesky_factor();
        assert!((l * l.transpose() - g).norm() < 1e-10);
    }

    #[test]
    fn density_peaks_at_center() {
        let m = model_2x2(0.5);
        assert!(m.log_density_unnormalized(m.center()).unwrap().abs() < 1e-24);
        assert!(m.mahalanobis_sq(m.center()).unwrap() < 1e-24);
    }

    #[test]
    fn spherical_density_matches_distance() {
        let m = model_2x2(0.5);
        for c in m.sample(20, 3).unwrap() {
            let d = distance(m.center(), &c).unwrap();
            let ld = m.log_density_unnormalized(&c).unwrap();
            assert!((ld + d * d / (2.0 * 0.5)).abs() < 1e-10);
            assert!(m.mahalanobis_sq(&c).unwrap() > 0.0);
        }
    }

    #[test]
    fn unit_dispersion_gives_squared_distance() {
        let m = model_2x2(1.0);
        let c = SpdMatrix::from_row_slice(2, &[1.0, 0.1, 0.1, 3.0]).unwrap();
        let d = distance(m.center(), &c).unwrap();
        assert!((m.mahalanobis_sq(&c).unwrap() - d * d).abs() < 1e-12);
    }

    #[test]
    fn scalar_density() {
        let (center, gamma, c) = (1.7_f64, 0.3_f64, 4.2_f64);
        let m = RiemannianNormal::new(
            SpdMatrix::scalar(center).unwrap(),
            Dispersion::new(DMatrix::from_element(1, 1, gamma)).unwrap(),
        )
        .unwrap();
        let expect = -(c / center).ln().powi(2) / (2.0 * gamma);
        assert!((m.log_density_unnormalized(&SpdMatrix::scalar(c).unwrap()).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = model_2x2(0.5);
        let a = m.sample(10, 42).unwrap();
        let b = m.sample(10, 42).unwrap();
        let c = m.sample(10, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // draw i does not depend on how many draws precede it
        assert_eq!(m.draw(42, 7).unwrap(), a[7]);
    }

    #[test]
    fn scalar_log_pushforward_mean() {
        let sigma = 0.8_f64;
        let m = RiemannianNormal::new(
            SpdMatrix::scalar(1.0).unwrap(),
            Dispersion::new(DMatrix::from_element(1, 1, sigma * sigma)).unwrap(),
        )
        .unwrap();
        let n = 100_000;
        let mean = m
            .sample(n, 11)
            .unwrap()
            .iter()
            .map(|c| c.matrix()[(0, 0)].ln())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }
}
