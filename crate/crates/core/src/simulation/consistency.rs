use rayon::prelude::*;
use serde::Serialize;

use super::{median, SimConfig};
use crate::error::{Error, Result};
use crate::estimation::{dispersion_estimate, frechet_mean};
use crate::geometry::squared_distance_unchecked;
use crate::normal::RiemannianNormal;
use crate::rng::derive_seed;
use crate::tolerances::{MEAN_MAX_ITER, MEAN_TOL};

/// Keeps consistency streams apart from the two-tag test streams.
const STREAM_TAG: u64 = 0x636f_6e73;

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    /// Median of `d(C̄_n, C*)`.
    pub median_mean_error: f64,
    /// Median of `‖Ŝ_n − Γ‖_F`.
    pub median_dispersion_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub config: SimConfig,
    pub rows: Vec<ConsistencyRow>,
    pub mean_error_decreasing: bool,
    pub dispersion_error_decreasing: bool,
}

/// Medians over `R` replicates of the Fréchet-mean and dispersion errors of a
/// single sample of size `n` from `N(C*, Γ)`, for each `n` in `n_grid`.
/// Group sizes in `cfg` are not used.
pub fn simulate_consistency(cfg: &SimConfig, n_grid: &[usize]) -> Result<ConsistencyReport> {
    if n_grid.is_empty() {
        return Err(Error::usage("the sample-size grid is empty"));
    }
    if let Some(n) = n_grid.iter().find(|n| **n < 2) {
        return Err(Error::usage(format!("sample sizes must be at least 2, got {n}")));
    }
    let model = RiemannianNormal::new(cfg.center().clone(), cfg.gamma().clone())?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let errors: Vec<(f64, f64)> = (0..cfg.replications() as u64)
            .into_par_iter()
            .map(|r| {
                let sample = model.sample(n, derive_seed(cfg.seed(), &[STREAM_TAG, n as u64, r]))?;
                let (mean, _) = frechet_mean(&sample, MEAN_TOL, MEAN_MAX_ITER)?;
                let disp = dispersion_estimate(&sample, &mean)?;
                Ok((
                    squared_distance_unchecked(&mean, cfg.center()).sqrt(),
                    (&disp.matrix - cfg.gamma().matrix()).norm(),
                ))
            })
            .collect::<Result<_>>()?;
        let (means, disps): (Vec<f64>, Vec<f64>) = errors.into_iter().unzip();
        rows.push(ConsistencyRow {
            n,
            median_mean_error: median(&means),
            median_dispersion_error: median(&disps),
        });
    }
    let decreasing = |f: fn(&ConsistencyRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    Ok(ConsistencyReport {
        config: cfg.clone(),
        mean_error_decreasing: decreasing(|r| r.median_mean_error),
        dispersion_error_decreasing: decreasing(|r| r.median_dispersion_error),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpdMatrix;
    use crate::normal::Dispersion;

    #[test]
    fn small_noise_gives_small_errors() {
        let cfg = SimConfig::new(
            SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap(),
            Dispersion::isotropic(3, 1e-4).unwrap(),
            vec![2],
            20,
            7,
            0.05,
        )
        .unwrap();
        let r = simulate_consistency(&cfg, &[50]).unwrap();
        assert!(r.rows[0].median_mean_error < 0.01);
        assert!(r.rows[0].median_dispersion_error < 1e-3);
        let again = simulate_consistency(&cfg, &[50]).unwrap();
        assert_eq!(r.rows[0].median_mean_error, again.rows[0].median_mean_error);
        assert!(simulate_consistency(&cfg, &[]).unwrap_err().is_usage());
    }
}
