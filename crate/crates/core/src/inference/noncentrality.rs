use crate::error::{Error, Result};
use crate::geometry::{squared_distance_unchecked, vec_identity_unchecked, whitened_log, SpdMatrix};
use crate::normal::Dispersion;

fn check_inputs(group_means: &[SpdMatrix], pi: &[f64], gamma: &Dispersion, overall: &SpdMatrix) -> Result<()> {
    if group_means.is_empty() || group_means.len() != pi.len() {
        return Err(Error::usage("need one positive weight per group mean"));
    }
    if pi.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::usage("group weights must be positive"));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::usage(format!("group weights must sum to 1, got {total}")));
    }
    let p = overall.dim();
    if group_means.iter().any(|c| c.dim() != p) {
        return Err(Error::usage("group means and overall mean differ in dimension"));
    }
    if gamma.dim() != crate::geometry::tangent_dim(p) {
        return Err(Error::usage("dispersion dimension does not match p"));
    }
    Ok(())
}

/// `n Σ π_l v_lᵀ Γ⁻¹ v_l` with `v_l = Vec_{C*}(log_{C*}(C_l))`, the
/// noncentrality of the Wilks' Lambda statistic.
pub fn noncentrality_novel(
    group_means: &[SpdMatrix],
    pi: &[f64],
    gamma: &Dispersion,
    overall: &SpdMatrix,
    n: usize,
) -> Result<f64> {
    check_inputs(group_means, pi, gamma, overall)?;
    let mut acc = 0.0;
    for (c, w) in group_means.iter().zip(pi) {
        let v = vec_identity_unchecked(&whitened_log(overall, c));
        acc += w * gamma.inverse_quadratic(&v)?;
    }
    Ok(n as f64 * acc)
}

/// `n (Σ π_l d²(C_l, C*))² / (tr(Γ) Σ π_l²)`, the noncentrality of the
/// Fréchet ANOVA statistic.
pub fn noncentrality_frechet(
    group_means: &[SpdMatrix],
    pi: &[f64],
    gamma: &Dispersion,
    overall: &SpdMatrix,
    n: usize,
) -> Result<f64> {
    check_inputs(group_means, pi, gamma, overall)?;
    let spread: f64 = group_means
        .iter()
        .zip(pi)
        .map(|(c, w)| w * squared_distance_unchecked(c, overall))
        .sum();
    let concentration: f64 = pi.iter().map(|w| w * w).sum();
    Ok(n as f64 * spread * spread / (gamma.trace() * concentration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;
    use nalgebra::DMatrix;

    fn displaced(theta: f64) -> (Vec<SpdMatrix>, SpdMatrix) {
        // unit-norm direction at the identity, symmetric with off-diagonal mass
        let h = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, -0.2]);
        let h = &h / h.norm();
        let c1 = SpdMatrix::from_computed(crate::geometry::sym_fn(&(h * theta), f64::exp)).unwrap();
        let id = SpdMatrix::identity(2);
        (vec![c1, id.clone(), id.clone()], id)
    }

    #[test]
    fn equal_means_give_zero() {
        let id = SpdMatrix::identity(2);
        let g = Dispersion::isotropic(3, 0.3).unwrap();
        let means = vec![id.clone(), id.clone()];
        assert_eq!(noncentrality_novel(&means, &[0.5, 0.5], &g, &id, 50).unwrap(), 0.0);
        assert_eq!(noncentrality_frechet(&means, &[0.5, 0.5], &g, &id, 50).unwrap(), 0.0);
    }

    #[test]
    fn single_displacement() {
        let (theta, sigma2, n) = (0.7, 0.25, 60);
        let (means, overall) = displaced(theta);
        assert!((distance(&means[0], &overall).unwrap() - theta).abs() < 1e-12);
        let g = Dispersion::isotropic(3, sigma2).unwrap();
        let pi = [1.0 / 3.0; 3];
        let novel = noncentrality_novel(&means, &pi, &g, &overall, n).unwrap();
        assert!((novel - n as f64 * theta * theta / (3.0 * sigma2)).abs() < 1e-10);
        let (means2, _) = displaced(2.0 * theta);
        let ratio = noncentrality_novel(&means2, &pi, &g, &overall, n).unwrap() / novel;
        assert!((ratio - 4.0).abs() < 1e-9);
        let fr = noncentrality_frechet(&means, &pi, &g, &overall, n).unwrap();
        let fr2 = noncentrality_frechet(&means2, &pi, &g, &overall, n).unwrap();
        assert!((fr2 / fr - 16.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_two_group_frechet() {
        let (theta, sigma2, n) = (0.5, 0.2, 40);
        let (mut means, overall) = displaced(theta);
        means.truncate(2);
        let g = Dispersion::isotropic(3, sigma2).unwrap();
        let fr = noncentrality_frechet(&means, &[0.5, 0.5], &g, &overall, n).unwrap();
        assert!((fr - n as f64 * theta.powi(4) / (2.0 * sigma2 * 3.0)).abs() < 1e-10);
    }

    #[test]
    fn scalar_novel() {
        let overall = SpdMatrix::scalar(2.0).unwrap();
        let means = [SpdMatrix::scalar(3.0).unwrap(), SpdMatrix::scalar(1.5).unwrap()];
        let g = Dispersion::new(DMatrix::from_element(1, 1, 0.4)).unwrap();
        let pi = [0.3, 0.7];
        let expect = 25.0 * (0.3 * (1.5f64).ln().powi(2) + 0.7 * (0.75f64).ln().powi(2)) / 0.4;
        assert!((noncentrality_novel(&means, &pi, &g, &overall, 25).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn weight_contract() {
        let id = SpdMatrix::identity(2);
        let g = Dispersion::isotropic(3, 0.3).unwrap();
        let means = vec![id.clone(), id.clone()];
        assert!(noncentrality_novel(&means, &[0.5, 0.6], &g, &id, 5).unwrap_err().is_usage());
        assert!(noncentrality_frechet(&means, &[1.0, 0.0], &g, &id, 5).unwrap_err().is_usage());
    }
}
