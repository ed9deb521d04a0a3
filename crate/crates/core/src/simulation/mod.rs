//! Seeded Monte Carlo experiments: null calibration and power of both tests,
//! estimator consistency, and a numerical audit of the geometry layer.
//!
//! Every replicate draws from its own keyed random stream, so reports are a
//! pure function of the configuration whatever the thread count. Group `l` of
//! replicate `r` always uses the same stream; under an alternative only its
//! center moves, which makes power curves over `θ` use common random numbers.

mod audit;
mod consistency;
mod null;
mod power;

pub use audit::{
    geometry_audit, geometry_invariants, DiscrepancyRow, GeometryAudit, InvariantCheck, JacobiEndpointCheck, ResidualSweep,
    RichardsonCheck, ScalarDiscrepancyRow,
};
pub use consistency::{simulate_consistency, ConsistencyReport, ConsistencyRow};
pub use null::{simulate_null, simulate_null_curve, CalibrationReport, NullCurvePoint, QuantilePoint, TestCalibration};
pub use power::{simulate_power, Dominance, PowerReport, PowerRow, RateEstimate};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::GroupedSample;
use crate::geometry::{norm, tangent_dim, unvec_at, SpdMatrix, TangentCoords, TangentVector};
use crate::inference::{frechet_anova, riemannian_manova};
use crate::normal::{Dispersion, RiemannianNormal};
use crate::rng::derive_seed;

/// Design of a simulation study.
#[derive(Clone, Debug, Serialize)]
pub struct SimConfig {
    p: usize,
    g: usize,
    group_sizes: Vec<usize>,
    center: SpdMatrix,
    gamma: Dispersion,
    replications: usize,
    seed: u64,
    alpha: f64,
}

impl SimConfig {
    pub fn new(
        center: SpdMatrix,
        gamma: Dispersion,
        group_sizes: Vec<usize>,
        replications: usize,
        seed: u64,
        alpha: f64,
    ) -> Result<Self> {
        let p = center.dim();
        if gamma.dim() != tangent_dim(p) {
            return Err(Error::usage(format!(
                "dispersion must be {0}x{0} for p = {p}",
                tangent_dim(p)
            )));
        }
        if group_sizes.is_empty() {
            return Err(Error::usage("at least one group is required"));
        }
        if let Some(s) = group_sizes.iter().find(|s| **s < 2) {
            return Err(Error::usage(format!("group sizes must be at least 2, got {s}")));
        }
        if replications < 1 {
            return Err(Error::usage("at least one replication is required"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::usage(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(SimConfig {
            p,
            g: group_sizes.len(),
            group_sizes,
            center,
            gamma,
            replications,
            seed,
            alpha,
        })
    }

    /// Identity center, `Γ = I_d`, `g` groups of `n_per_group`, `α = 0.05`.
    pub fn isotropic(p: usize, g: usize, n_per_group: usize, replications: usize, seed: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::usage("p must be positive"));
        }
        Self::new(
            SpdMatrix::identity(p),
            Dispersion::isotropic(tangent_dim(p), 1.0)?,
            vec![n_per_group; g],
            replications,
            seed,
            0.05,
        )
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn d(&self) -> usize {
        tangent_dim(self.p)
    }

    pub fn n(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn center(&self) -> &SpdMatrix {
        &self.center
    }

    pub fn gamma(&self) -> &Dispersion {
        &self.gamma
    }

    pub fn replications(&self) -> usize {
        self.replications
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `π_l = n_l / n`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.group_sizes.iter().map(|s| *s as f64 / n).collect()
    }

    pub fn with_group_sizes(&self, group_sizes: Vec<usize>) -> Result<Self> {
        Self::new(
            self.center.clone(),
            self.gamma.clone(),
            group_sizes,
            self.replications,
            self.seed,
            self.alpha,
        )
    }

    /// The preconditions of both tests: `g ≥ 2` and `n − g ≥ d`.
    fn check_testable(&self) -> Result<()> {
        if self.g < 2 {
            return Err(Error::usage("a test of equal means needs at least two groups"));
        }
        if self.n() < self.g + self.d() {
            return Err(Error::usage(format!(
                "MANOVA needs n - g >= d = {}; total n = {} with g = {}",
                self.d(),
                self.n(),
                self.g
            )));
        }
        Ok(())
    }
}

/// A fixed alternative: group `displaced_group` is centered at
/// `exp_{C*}(θ H)` for each `θ` in the grid, the rest at `C*`.
#[derive(Clone, Debug, Serialize)]
pub struct AlternativeSpec {
    displaced_group: usize,
    #[serde(serialize_with = "crate::serde_util::tangent")]
    direction: TangentVector,
    theta_grid: Vec<f64>,
}

impl AlternativeSpec {
    /// `direction` must have unit norm at its base within `1e-10`.
    pub fn new(displaced_group: usize, direction: TangentVector, theta_grid: Vec<f64>) -> Result<Self> {
        let len = norm(&direction);
        if (len - 1.0).abs() > 1e-10 {
            return Err(Error::usage(format!("direction must have unit norm, got {len}")));
        }
        if theta_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::usage("theta values must be finite and non-negative"));
        }
        Ok(AlternativeSpec {
            displaced_group,
            direction,
            theta_grid,
        })
    }

    /// The unit direction whose tangent coordinates at `center` are all equal.
    pub fn uniform_direction(center: &SpdMatrix) -> TangentVector {
        let d = tangent_dim(center.dim());
        let coords = DVector::from_element(d, 1.0 / (d as f64).sqrt());
        let coords = TangentCoords::new(center.clone(), coords).expect("length matches the tangent dimension");
        unvec_at(center, &coords).expect("coordinates are based at center")
    }

    pub fn displaced_group(&self) -> usize {
        self.displaced_group
    }

    pub fn direction(&self) -> &TangentVector {
        &self.direction
    }

    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }
}

/// Per-replicate p-values and statistics; `None` marks an excluded test.
#[derive(Clone, Copy, Debug)]
struct ReplicateOutcome {
    manova: Option<(f64, f64)>,
    frechet: Option<(f64, f64)>,
    frechet_degenerate: bool,
}

fn draw_groups(centers: &[SpdMatrix], gamma: &Dispersion, sizes: &[usize], seed: u64, replicate: u64) -> Result<GroupedSample> {
    let groups = centers
        .iter()
        .zip(sizes)
        .enumerate()
        .map(|(l, (c, n))| {
            RiemannianNormal::new(c.clone(), gamma.clone())?.sample(*n, derive_seed(seed, &[replicate, l as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    GroupedSample::from_groups(groups)
}

fn run_replicate(centers: &[SpdMatrix], cfg: &SimConfig, replicate: u64) -> Result<ReplicateOutcome> {
    let sample = draw_groups(centers, &cfg.gamma, &cfg.group_sizes, cfg.seed, replicate)?;
    let manova = match riemannian_manova(&sample) {
        Ok(r) => Some((r.statistic, r.p_value)),
        Err(e) if e.is_usage() => return Err(e),
        Err(_) => None,
    };
    let (frechet, frechet_degenerate) = match frechet_anova(&sample) {
        Ok(r) => (Some((r.statistic, r.p_value)), false),
        Err(Error::DegenerateVariance { .. }) => (None, true),
        Err(e) if e.is_usage() => return Err(e),
        Err(_) => (None, false),
    };
    Ok(ReplicateOutcome {
        manova,
        frechet,
        frechet_degenerate,
    })
}

fn run_all(centers: &[SpdMatrix], cfg: &SimConfig) -> Result<Vec<ReplicateOutcome>> {
    use rayon::prelude::*;
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| run_replicate(centers, cfg, r))
        .collect()
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Rejection rate and its binomial standard error.
fn rate(rejections: usize, used: usize) -> (f64, f64) {
    if used == 0 {
        return (f64::NAN, f64::NAN);
    }
    let r = rejections as f64 / used as f64;
    (r, (r * (1.0 - r) / used as f64).sqrt())
}
