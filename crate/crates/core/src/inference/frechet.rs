use serde::Serialize;

use super::chi2::chi_square_sf;
use crate::error::{Error, Result};
use crate::estimation::{frechet_mean, GroupedSample};
use crate::geometry::squared_distance_unchecked;
use crate::tolerances::{DEGENERATE_VARIANCE, MEAN_MAX_ITER, TEST_MEAN_TOL};

/// The ingredients of the Fréchet ANOVA statistic, available even when the
/// statistic itself is undefined.
#[derive(Clone, Debug, Serialize)]
pub struct FrechetAnovaComponents {
    /// `λ_l = n_l / n`.
    pub weights: Vec<f64>,
    /// `V̂_l`, mean squared distance to the group mean.
    pub group_variances: Vec<f64>,
    /// `V̂_p`, mean squared distance to the overall mean.
    pub pooled_variance: f64,
    /// `σ̂²_l`, empirical variance of the squared distances in group `l`.
    pub sigma_hats: Vec<f64>,
    /// `F_n = V̂_p − Σ λ_l V̂_l`.
    pub f_n: f64,
    /// `U_n`; `None` when some `σ̂²_l` is at or below the degeneracy threshold.
    pub u_n: Option<f64>,
}

/// Output of [`frechet_anova`].
#[derive(Clone, Debug, Serialize)]
pub struct FrechetAnovaResult {
    pub statistic: f64,
    pub f_n: f64,
    pub u_n: f64,
    pub df: usize,
    pub p_value: f64,
    pub group_variances: Vec<f64>,
    pub pooled_variance: f64,
    pub sigma_hats: Vec<f64>,
}

/// Group and pooled variances, `σ̂²_l`, `F_n` and (when defined) `U_n`.
///
/// Requires `g ≥ 2` and `n_l ≥ 2` in every group.
pub fn frechet_anova_components(sample: &GroupedSample) -> Result<FrechetAnovaComponents> {
    let g = sample.g();
    if g < 2 {
        return Err(Error::usage("Fréchet ANOVA needs at least two groups"));
    }
    if let Some(small) = sample.groups().iter().find(|gr| gr.observations.len() < 2) {
        return Err(Error::usage(format!(
            "Fréchet ANOVA needs at least 2 observations per group; group '{}' has {}",
            small.label,
            small.observations.len()
        )));
    }
    let weights = sample.weights();
    let (overall, _) = frechet_mean(&sample.pooled(), TEST_MEAN_TOL, MEAN_MAX_ITER)?;
    let mut group_variances = Vec::with_capacity(g);
    let mut sigma_hats = Vec::with_capacity(g);
    let mut pooled_variance = 0.0;
    for (group, lambda) in sample.groups().iter().zip(&weights) {
        let obs = &group.observations;
        let m = obs.len() as f64;
        let (mean, _) = frechet_mean(obs, TEST_MEAN_TOL, MEAN_MAX_ITER)?;
        let sq: Vec<f64> = obs.iter().map(|c| squared_distance_unchecked(&mean, c)).collect();
        let v = sq.iter().sum::<f64>() / m;
        sigma_hats.push(sq.iter().map(|x| (x - v).powi(2)).sum::<f64>() / m);
        group_variances.push(v);
        pooled_variance += lambda * obs.iter().map(|c| squared_distance_unchecked(&overall, c)).sum::<f64>() / m;
    }
    let f_n = pooled_variance - weights.iter().zip(&group_variances).map(|(l, v)| l * v).sum::<f64>();
    let u_n = sigma_hats.iter().all(|s| *s > DEGENERATE_VARIANCE).then(|| {
        let mut u = 0.0;
        for j in 0..g {
            for l in j + 1..g {
                let coef = weights[j] * weights[l] / (sigma_hats[j] * sigma_hats[l]);
                u += coef * (group_variances[j] - group_variances[l]).powi(2);
            }
        }
        u
    });
    Ok(FrechetAnovaComponents {
        weights,
        group_variances,
        pooled_variance,
        sigma_hats,
        f_n,
        u_n,
    })
}

/// Fréchet ANOVA: `T_n = n U_n / (Σ λ_l/σ̂²_l) + n F_n² / (Σ λ_l² σ̂²_l)`
/// referred to `χ²_{g−1}`.
///
/// Any `σ̂²_l ≤ 1e-14` is a [`Error::DegenerateVariance`].
pub fn frechet_anova(sample: &GroupedSample) -> Result<FrechetAnovaResult> {
    let comp = frechet_anova_components(sample)?;
    if let Some((group, value)) = comp
        .sigma_hats
        .iter()
        .copied()
        .enumerate()
        .find(|(_, s)| !(*s > DEGENERATE_VARIANCE))
    {
        return Err(Error::DegenerateVariance { group, value });
    }
    let u_n = comp.u_n.expect("non-degenerate variances give U_n");
    let n = sample.n() as f64;
    let inv_sum: f64 = comp.weights.iter().zip(&comp.sigma_hats).map(|(l, s)| l / s).sum();
    let sq_sum: f64 = comp.weights.iter().zip(&comp.sigma_hats).map(|(l, s)| l * l * s).sum();
    let statistic = n * u_n / inv_sum + n * comp.f_n * comp.f_n / sq_sum;
    let df = sample.g() - 1;
    Ok(FrechetAnovaResult {
        statistic,
        f_n: comp.f_n,
        u_n,
        df,
        p_value: chi_square_sf(statistic, df)?,
        group_variances: comp.group_variances,
        pooled_variance: comp.pooled_variance,
        sigma_hats: comp.sigma_hats,
    })
}
