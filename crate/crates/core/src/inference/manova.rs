use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::chi2::chi_square_sf;
use crate::error::{Error, Result};
use crate::estimation::{frechet_mean, GroupedSample};
use crate::geometry::{max_abs, sym_eigen, vec_identity_unchecked, whitened_log, SpdMatrix};
use crate::tolerances::{DECOMPOSITION, MEAN_MAX_ITER, SINGULAR_RCOND, TEST_MEAN_TOL};

/// Between-group vector `v_l = Vec_{Ĉ_l}(log_{Ĉ_l}(Ĉ))` of one group.
#[derive(Clone, Debug, Serialize)]
pub struct GroupVector {
    pub label: String,
    pub size: usize,
    #[serde(serialize_with = "crate::serde_util::vector")]
    pub coords: DVector<f64>,
}

/// The scatter matrices behind Wilks' Lambda, `T = B + W`.
#[derive(Clone, Debug, Serialize)]
pub struct WilksDecomposition {
    pub lambda_star: f64,
    pub log_det_within: f64,
    pub log_det_total: f64,
    #[serde(serialize_with = "crate::serde_util::matrix")]
    pub within: DMatrix<f64>,
    #[serde(serialize_with = "crate::serde_util::matrix")]
    pub total: DMatrix<f64>,
    #[serde(serialize_with = "crate::serde_util::matrix")]
    pub between: DMatrix<f64>,
    pub overall_mean: SpdMatrix,
    pub group_means: Vec<SpdMatrix>,
    pub group_vectors: Vec<GroupVector>,
}

/// Log-determinant of a symmetric PSD scatter matrix, failing when it is
/// numerically singular.
fn scatter_log_det(m: &DMatrix<f64>, which: &'static str) -> Result<f64> {
    let (vals, _) = sym_eigen(m);
    let (lo, hi) = (vals.min(), vals.max());
    let logdet = vals.iter().map(|v| v.ln()).sum::<f64>();
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(rcond >= SINGULAR_RCOND) {
        return Err(Error::SingularScatter { which, rcond, logdet });
    }
    Ok(logdet)
}

/// Computes the overall and group Fréchet means, the vectors `u_lj`, `v_l`,
/// `w_lj = v_l − u_lj`, the scatter matrices `W = Σ u uᵀ`, `T = Σ w wᵀ`,
/// `B = Σ n_l v_l v_lᵀ`, and `Λ* = det W / det T`.
///
/// Requires `g ≥ 2` and `n − g ≥ d`. The identity `T = B + W` is checked and
/// a violation beyond `1e-9` is reported as a numeric error.
pub fn wilks_lambda(sample: &GroupedSample, mean_tol: f64) -> Result<WilksDecomposition> {
    let (g, n, d) = (sample.g(), sample.n(), sample.d());
    if g < 2 {
        return Err(Error::usage("Wilks' Lambda needs at least two groups"));
    }
    if n < g + d {
        return Err(Error::usage(format!(
            "need at least n = d + g = {} observations for p = {}, got {n}",
            d + g,
            sample.p()
        )));
    }
    let (overall, _) = frechet_mean(&sample.pooled(), mean_tol, MEAN_MAX_ITER)?;
    let mut within = DMatrix::zeros(d, d);
    let mut total = DMatrix::zeros(d, d);
    let mut between = DMatrix::zeros(d, d);
    let mut group_means = Vec::with_capacity(g);
    let mut group_vectors = Vec::with_capacity(g);
    for group in sample.groups() {
        let (mean, _) = frechet_mean(&group.observations, mean_tol, MEAN_MAX_ITER)?;
        let v = vec_identity_unchecked(&whitened_log(&mean, &overall));
        for c in &group.observations {
            let u = vec_identity_unchecked(&whitened_log(&mean, c));
            let w = &v - &u;
            within.ger(1.0, &u, &u, 1.0);
            total.ger(1.0, &w, &w, 1.0);
        }
        let size = group.observations.len();
        between.ger(size as f64, &v, &v, 1.0);
        group_means.push(mean);
        group_vectors.push(GroupVector {
            label: group.label.clone(),
            size,
            coords: v,
        });
    }
    let gap = max_abs(&(&total - &between - &within));
    if !(gap <= DECOMPOSITION) {
        return Err(Error::numeric(format!(
            "scatter decomposition T = B + W violated by {gap:.3e}; group means did not converge"
        )));
    }
    let log_det_total = scatter_log_det(&total, "T")?;
    let log_det_within = scatter_log_det(&within, "W")?;
    Ok(WilksDecomposition {
        lambda_star: (log_det_within - log_det_total).exp(),
        log_det_within,
        log_det_total,
        within,
        total,
        between,
        overall_mean: overall,
        group_means,
        group_vectors,
    })
}

/// Output of [`riemannian_manova`].
#[derive(Clone, Debug, Serialize)]
pub struct ManovaResult {
    /// `−n ln Λ*`.
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub n: usize,
    pub decomposition: WilksDecomposition,
}

/// Wilks' Lambda test of equal group means, with `−n ln Λ*` referred to
/// `χ²_{d(g−1)}`.
pub fn riemannian_manova(sample: &GroupedSample) -> Result<ManovaResult> {
    let decomposition = wilks_lambda(sample, TEST_MEAN_TOL)?;
    let n = sample.n();
    let df = sample.d() * (sample.g() - 1);
    let statistic = (-(n as f64) * (decomposition.log_det_within - decomposition.log_det_total)).max(0.0);
    Ok(ManovaResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df)?,
        n,
        decomposition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_groups(groups: &[&[f64]]) -> GroupedSample {
        GroupedSample::from_groups(
            groups
                .iter()
                .map(|g| g.iter().map(|l| SpdMatrix::scalar(l.exp()).unwrap()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_hand_computation() {
        let s = scalar_groups(&[&[0.0, 2.0], &[1.0, 3.0]]);
        let w = wilks_lambda(&s, 1e-12).unwrap();
        assert!((w.overall_mean.matrix()[(0, 0)].ln() - 1.5).abs() < 1e-12);
        assert!((w.group_means[0].matrix()[(0, 0)].ln() - 1.0).abs() < 1e-12);
        assert!((w.group_means[1].matrix()[(0, 0)].ln() - 2.0).abs() < 1e-12);
        assert!((w.group_vectors[0].coords[0] - 0.5).abs() < 1e-12);
        assert!((w.group_vectors[1].coords[0] + 0.5).abs() < 1e-12);
        assert!((w.within[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((w.between[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((w.total[(0, 0)] - 5.0).abs() < 1e-12);
        assert!((w.lambda_star - 0.8).abs() < 1e-12);

        let r = riemannian_manova(&s).unwrap();
        assert!((r.statistic + 4.0 * 0.8_f64.ln()).abs() < 1e-10);
        assert!((r.statistic - 0.8926).abs() < 1e-4);
        assert_eq!(r.df, 1);
    }

    #[test]
    fn identical_groups_give_unit_lambda() {
        let s = scalar_groups(&[&[0.0, 0.5, 2.0], &[2.0, 0.0, 0.5]]);
        let r = riemannian_manova(&s).unwrap();
        assert!((r.decomposition.lambda_star - 1.0).abs() < 1e-12);
        assert!(r.statistic < 1e-10);
        assert!((r.p_value - 1.0).abs() < 1e-6);
        assert!(max_abs(&r.decomposition.between) < 1e-20);
    }

    #[test]
    fn too_few_observations() {
        let s = scalar_groups(&[&[0.0], &[1.0]]);
        let e = wilks_lambda(&s, 1e-12).unwrap_err();
        assert!(e.is_usage() && e.to_string().contains("d + g = 3"), "{e}");
        let one = scalar_groups(&[&[0.0, 1.0, 2.0]]);
        assert!(wilks_lambda(&one, 1e-12).unwrap_err().is_usage());
    }

    #[test]
    fn singular_total_scatter() {
        // every observation equals its group mean and all groups share it
        let s = scalar_groups(&[&[1.0, 1.0], &[1.0, 1.0]]);
        match wilks_lambda(&s, 1e-12).unwrap_err() {
            Error::SingularScatter { which, .. } => assert_eq!(which, "T"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn degrees_of_freedom() {
        let pts = |shift: f64| -> Vec<SpdMatrix> {
            (0..5)
                .map(|i| {
                    let t = i as f64 * 0.37 + shift;
                    SpdMatrix::from_row_slice(
                        3,
                        &[2.0 + t.sin(), 0.3 * t.cos(), 0.1 * t, 0.3 * t.cos(), 1.5 + 0.2 * t, -0.2 * (2.0 * t).sin(), 0.1 * t, -0.2 * (2.0 * t).sin(), 1.0 + 0.1 * t * t],
                    )
                    .unwrap()
                })
                .collect()
        };
        let s = GroupedSample::from_groups(vec![pts(0.0), pts(0.11), pts(0.29)]).unwrap();
        let r = riemannian_manova(&s).unwrap();
        assert_eq!(r.df, 12);
        assert!(r.decomposition.lambda_star > 0.0 && r.decomposition.lambda_star <= 1.0);
    }
}
