use serde::Serialize;

use super::{quantile_sorted, rate, run_all, ReplicateOutcome, SimConfig};
use crate::error::Result;
use crate::inference::{chi_square_cdf, chi_square_quantile};

/// Levels at which empirical and reference quantiles are compared.
const QQ_LEVELS: [f64; 9] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];

#[derive(Clone, Debug, Serialize)]
pub struct QuantilePoint {
    pub level: f64,
    pub empirical: f64,
    pub reference: f64,
}

/// Null behavior of one test against its `χ²_df` reference.
#[derive(Clone, Debug, Serialize)]
pub struct TestCalibration {
    pub df: usize,
    /// Replicates entering the rates.
    pub used: usize,
    /// Replicates dropped, including degenerate ones.
    pub excluded: usize,
    /// Fréchet ANOVA replicates with a vanishing `σ̂²_l` (always 0 for MANOVA).
    pub degenerate: usize,
    pub rejection_rate: f64,
    pub standard_error: f64,
    pub ks_distance: f64,
    /// `1.6276 / (√m + 0.12 + 0.11/√m)` for `m` used replicates.
    pub ks_critical_1pct: f64,
    pub quantiles: Vec<QuantilePoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub config: SimConfig,
    pub manova: TestCalibration,
    pub frechet: TestCalibration,
}

/// Kolmogorov–Smirnov distance between sorted data and a continuous cdf.
pub(crate) fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let m = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0_f64, |acc, (i, x)| {
        let f = cdf(*x);
        acc.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
    })
}

pub(crate) fn ks_critical_1pct(m: usize) -> f64 {
    let r = (m as f64).sqrt();
    1.6276 / (r + 0.12 + 0.11 / r)
}

fn calibrate(results: &[Option<(f64, f64)>], df: usize, alpha: f64, degenerate: usize) -> Result<TestCalibration> {
    let mut stats: Vec<f64> = results.iter().flatten().map(|(s, _)| *s).collect();
    let rejections = results.iter().flatten().filter(|(_, p)| *p < alpha).count();
    let used = stats.len();
    let (rejection_rate, standard_error) = rate(rejections, used);
    stats.sort_by(f64::total_cmp);
    let (ks_distance, quantiles) = if used == 0 {
        (f64::NAN, Vec::new())
    } else {
        let ks = ks_distance(&stats, |x| chi_square_cdf(x.max(0.0), df).unwrap_or(f64::NAN));
        let qs = QQ_LEVELS
            .iter()
            .map(|&level| {
                Ok(QuantilePoint {
                    level,
                    empirical: quantile_sorted(&stats, level),
                    reference: chi_square_quantile(level, df)?,
                })
            })
            .collect::<Result<_>>()?;
        (ks, qs)
    };
    Ok(TestCalibration {
        df,
        used,
        excluded: results.len() - used,
        degenerate,
        rejection_rate,
        standard_error,
        ks_distance,
        ks_critical_1pct: ks_critical_1pct(used.max(1)),
        quantiles,
    })
}

pub(super) fn summarize(cfg: &SimConfig, outcomes: &[ReplicateOutcome]) -> Result<(TestCalibration, TestCalibration)> {
    let manova: Vec<_> = outcomes.iter().map(|o| o.manova).collect();
    let frechet: Vec<_> = outcomes.iter().map(|o| o.frechet).collect();
    let degenerate = outcomes.iter().filter(|o| o.frechet_degenerate).count();
    Ok((
        calibrate(&manova, cfg.d() * (cfg.g() - 1), cfg.alpha(), 0)?,
        calibrate(&frechet, cfg.g() - 1, cfg.alpha(), degenerate)?,
    ))
}

/// Runs both tests on `R` replicates drawn under the null (every group from
/// `N(C*, Γ)`) and compares the statistics with their `χ²` references.
pub fn simulate_null(cfg: &SimConfig) -> Result<CalibrationReport> {
    cfg.check_testable()?;
    let centers = vec![cfg.center().clone(); cfg.g()];
    let outcomes = run_all(&centers, cfg)?;
    let (manova, frechet) = summarize(cfg, &outcomes)?;
    Ok(CalibrationReport {
        config: cfg.clone(),
        manova,
        frechet,
    })
}

/// One point of the sample-size versus KS-distance curve.
#[derive(Clone, Debug, Serialize)]
pub struct NullCurvePoint {
    pub n_per_group: usize,
    pub manova_ks: f64,
    pub frechet_ks: f64,
    pub manova_rejection_rate: f64,
    pub frechet_rejection_rate: f64,
    pub ks_critical_1pct: f64,
}

/// [`simulate_null`] repeated with every group of size `n` for each `n` in
/// `sizes`, keeping the rest of `cfg`.
pub fn simulate_null_curve(cfg: &SimConfig, sizes: &[usize]) -> Result<Vec<NullCurvePoint>> {
    sizes
        .iter()
        .map(|&n| {
            let report = simulate_null(&cfg.with_group_sizes(vec![n; cfg.g()])?)?;
            Ok(NullCurvePoint {
                n_per_group: n,
                manova_ks: report.manova.ks_distance,
                frechet_ks: report.frechet.ks_distance,
                manova_rejection_rate: report.manova.rejection_rate,
                frechet_rejection_rate: report.frechet.rejection_rate,
                ks_critical_1pct: report.manova.ks_critical_1pct,
            })
        })
        .collect()
}
