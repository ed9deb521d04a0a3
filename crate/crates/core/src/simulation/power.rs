use serde::Serialize;

use super::{rate, run_all, AlternativeSpec, ReplicateOutcome, SimConfig};
use crate::error::{Error, Result};
use crate::estimation::weighted_frechet_mean;
use crate::geometry::{exp_map, SpdMatrix};
use crate::inference::{chi_square_quantile, noncentral_chi_square_sf, noncentrality_frechet, noncentrality_novel};
use crate::tolerances::{MEAN_MAX_ITER, TEST_MEAN_TOL};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub standard_error: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Empirical and theoretical power at one `θ`.
///
/// The `delta_*` fields take the overall mean to be `C*`, as in the
/// single-displaced-group construction; `delta_frechet_over_d` divides
/// `delta_frechet` by `d`, the variant of the closed form with
/// `σ² d²` in the denominator. The theoretical powers instead use the
/// weighted Fréchet mean of the group centers, which is what the sample
/// overall mean estimates.
#[derive(Clone, Debug, Serialize)]
pub struct PowerRow {
    pub theta: f64,
    pub manova: RateEstimate,
    pub frechet: RateEstimate,
    pub frechet_degenerate: usize,
    pub delta_novel: f64,
    pub delta_frechet: f64,
    pub delta_frechet_over_d: f64,
    pub theory_manova: f64,
    pub theory_frechet: f64,
}

/// MANOVA power minus Fréchet power at one `θ`, against
/// `√(se_manova² + se_frechet²)`.
#[derive(Clone, Debug, Serialize)]
pub struct Dominance {
    pub theta: f64,
    pub difference: f64,
    pub standard_error: f64,
    pub exceeds_two_se: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerReport {
    pub config: SimConfig,
    pub alternative: AlternativeSpec,
    pub manova_df: usize,
    pub frechet_df: usize,
    pub rows: Vec<PowerRow>,
    pub dominance: Vec<Dominance>,
    /// Log-log slope of `delta_novel` between the two smallest positive `θ`.
    pub slope_novel: Option<f64>,
    pub slope_frechet: Option<f64>,
    /// Power never drops by more than two standard errors as `θ` grows.
    pub manova_monotone: bool,
    pub frechet_monotone: bool,
}

fn estimate(results: impl Iterator<Item = Option<(f64, f64)>>, alpha: f64) -> RateEstimate {
    let (mut used, mut excluded, mut rejections) = (0, 0, 0);
    for r in results {
        match r {
            Some((_, p)) => {
                used += 1;
                if p < alpha {
                    rejections += 1;
                }
            }
            None => excluded += 1,
        }
    }
    let (rate, standard_error) = rate(rejections, used);
    RateEstimate {
        rate,
        standard_error,
        used,
        excluded,
    }
}

fn monotone(rates: &[RateEstimate]) -> bool {
    rates.windows(2).all(|w| {
        let se = (w[0].standard_error.powi(2) + w[1].standard_error.powi(2)).sqrt();
        w[1].rate >= w[0].rate - 2.0 * se
    })
}

fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let mut positive: Vec<(f64, f64)> = points.iter().copied().filter(|(t, _)| *t > 0.0).collect();
    positive.sort_by(|a, b| a.0.total_cmp(&b.0));
    positive.dedup_by(|a, b| a.0 == b.0);
    match positive.as_slice() {
        [(t1, d1), (t2, d2), ..] if *d1 > 0.0 && *d2 > 0.0 => Some((d2 / d1).ln() / (t2 / t1).ln()),
        _ => None,
    }
}

/// Empirical power of both tests along `alt.theta_grid`, with the
/// noncentralities and the noncentral-χ² powers they imply.
pub fn simulate_power(cfg: &SimConfig, alt: &AlternativeSpec) -> Result<PowerReport> {
    cfg.check_testable()?;
    if alt.displaced_group() >= cfg.g() {
        return Err(Error::usage(format!(
            "displaced group {} out of range for g = {}",
            alt.displaced_group(),
            cfg.g()
        )));
    }
    if !alt.direction().base().same_point(cfg.center()) {
        return Err(Error::usage("alternative direction must be based at the configured center"));
    }
    let manova_df = cfg.d() * (cfg.g() - 1);
    let frechet_df = cfg.g() - 1;
    let manova_crit = chi_square_quantile(1.0 - cfg.alpha(), manova_df)?;
    let frechet_crit = chi_square_quantile(1.0 - cfg.alpha(), frechet_df)?;
    let pi = cfg.weights();
    let n = cfg.n();
    let mut rows = Vec::with_capacity(alt.theta_grid().len());
    for &theta in alt.theta_grid() {
        let displaced = exp_map(cfg.center(), &alt.direction().scale(theta))?;
        let mut centers: Vec<SpdMatrix> = vec![cfg.center().clone(); cfg.g()];
        centers[alt.displaced_group()] = displaced;
        let outcomes: Vec<ReplicateOutcome> = run_all(&centers, cfg)?;
        let delta_novel = noncentrality_novel(&centers, &pi, cfg.gamma(), cfg.center(), n)?;
        let delta_frechet = noncentrality_frechet(&centers, &pi, cfg.gamma(), cfg.center(), n)?;
        let (mixture_mean, _) = weighted_frechet_mean(&centers, &pi, TEST_MEAN_TOL, MEAN_MAX_ITER)?;
        let theory_novel = noncentrality_novel(&centers, &pi, cfg.gamma(), &mixture_mean, n)?;
        let theory_frechet = noncentrality_frechet(&centers, &pi, cfg.gamma(), &mixture_mean, n)?;
        rows.push(PowerRow {
            theta,
            manova: estimate(outcomes.iter().map(|o| o.manova), cfg.alpha()),
            frechet: estimate(outcomes.iter().map(|o| o.frechet), cfg.alpha()),
            frechet_degenerate: outcomes.iter().filter(|o| o.frechet_degenerate).count(),
            delta_novel,
            delta_frechet,
            delta_frechet_over_d: delta_frechet / cfg.d() as f64,
            theory_manova: noncentral_chi_square_sf(manova_crit, manova_df, theory_novel)?,
            theory_frechet: noncentral_chi_square_sf(frechet_crit, frechet_df, theory_frechet)?,
        });
    }
    let dominance = rows
        .iter()
        .filter(|r| r.theta > 0.0)
        .map(|r| {
            let se = (r.manova.standard_error.powi(2) + r.frechet.standard_error.powi(2)).sqrt();
            let difference = r.manova.rate - r.frechet.rate;
            Dominance {
                theta: r.theta,
                difference,
                standard_error: se,
                exceeds_two_se: difference > 2.0 * se,
            }
        })
        .collect();
    let mut by_theta: Vec<&PowerRow> = rows.iter().collect();
    by_theta.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let manova_rates: Vec<RateEstimate> = by_theta.iter().map(|r| r.manova).collect();
    let frechet_rates: Vec<RateEstimate> = by_theta.iter().map(|r| r.frechet).collect();
    Ok(PowerReport {
        config: cfg.clone(),
        alternative: alt.clone(),
        manova_df,
        frechet_df,
        slope_novel: log_slope(&rows.iter().map(|r| (r.theta, r.delta_novel)).collect::<Vec<_>>()),
        slope_frechet: log_slope(&rows.iter().map(|r| (r.theta, r.delta_frechet)).collect::<Vec<_>>()),
        manova_monotone: monotone(&manova_rates),
        frechet_monotone: monotone(&frechet_rates),
        rows,
        dominance,
    })
}
