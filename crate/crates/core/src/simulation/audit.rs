use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::median;
use crate::error::{Error, Result};
use crate::geometry::{
    distance, exp_map, inner, jacobi_covariant_derivative, jacobi_field, jacobi_velocity_closed_form,
    jacobi_velocity_fd, log_difference_residual, log_map, max_abs, parallel_transport, sym_fn, unvec_at, vec_at,
    SpdMatrix, TangentVector,
};
use crate::rng::{derive_seed, keyed_rng};

const INVARIANT_TOL: f64 = 1e-9;
const SWEEP_EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
const SWEEP_MAX_VARIATION: f64 = 0.2;
const RICHARDSON_H: f64 = 0.1;
const VELOCITY_H: f64 = 1e-4;
const SCALAR_B: [f64; 6] = [-1.0, 0.0, 0.7, 1.5, 2.0, 3.0];

/// Worst error of one geometric identity over random trials at one `p`.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub p: usize,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `log_difference_residual` over halving `ε`; variation is `(max − min)/max`
/// per triple.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualSweep {
    pub p: usize,
    pub triples: usize,
    pub eps: Vec<f64>,
    pub median_residual: Vec<f64>,
    pub worst_variation: f64,
    pub median_variation: f64,
    pub passed: bool,
}

/// Observed order `log₂((D(h) − D(h/2)) / (D(h/2) − D(h/4)))` of the
/// finite-difference velocity.
#[derive(Clone, Debug, Serialize)]
pub struct RichardsonCheck {
    pub p: usize,
    pub triples: usize,
    pub h: f64,
    pub min_order: f64,
    pub median_order: f64,
    pub max_order: f64,
    /// Fraction of triples with order within 0.3 of 2.
    pub fraction_near_two: f64,
    pub passed: bool,
}

/// Closed-form versus finite-difference Jacobi velocity on one triple.
#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyRow {
    pub p: usize,
    pub trial: usize,
    pub closed_form_norm: f64,
    pub finite_difference_norm: f64,
    pub discrepancy: f64,
    pub relative_discrepancy: f64,
    pub raw_asymmetry: f64,
    pub covariant_closed_form_norm: f64,
    pub covariant_finite_difference_norm: f64,
}

/// `C = 1`, `A = e²`, `B = e^b`: closed form `2 − 2b`, derivative `2b − 4`.
#[derive(Clone, Debug, Serialize)]
pub struct ScalarDiscrepancyRow {
    pub b: f64,
    pub closed_form: f64,
    pub finite_difference: f64,
    pub discrepancy: f64,
    pub predicted: f64,
    pub matches: bool,
}

/// Checks whether the Jacobi field vanishes at `s = 1`. It equals
/// `log_A(B)` there, so the claim fails whenever `B ≠ A`.
#[derive(Clone, Debug, Serialize)]
pub struct JacobiEndpointCheck {
    pub p: usize,
    pub trials: usize,
    pub min_endpoint_norm: f64,
    pub max_gap_to_log: f64,
    pub vanishing_claim_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryAudit {
    pub seed: u64,
    pub p_list: Vec<usize>,
    pub trials: usize,
    pub invariants: Vec<InvariantCheck>,
    pub residual_sweeps: Vec<ResidualSweep>,
    pub richardson: Vec<RichardsonCheck>,
    pub discrepancies: Vec<DiscrepancyRow>,
    pub scalar_rows: Vec<ScalarDiscrepancyRow>,
    /// Largest finite-difference velocity with `B = A`, per `p`.
    pub identical_endpoint_velocity: Vec<(usize, f64)>,
    pub jacobi_endpoint: Vec<JacobiEndpointCheck>,
    pub invariants_passed: bool,
}

fn gaussian(rng: &mut ChaCha8Rng, p: usize, q: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, q, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> SpdMatrix {
    let x = gaussian(rng, p, p, 0.5);
    SpdMatrix::from_computed(sym_fn(&(&x + x.transpose()), |v| (0.5 * v).exp())).expect("exponential is SPD")
}

fn random_tangent(rng: &mut ChaCha8Rng, c: &SpdMatrix) -> TangentVector {
    let x = gaussian(rng, c.dim(), c.dim(), 0.5);
    let s = (&x + x.transpose()) * 0.5;
    TangentVector::from_parts(c.clone(), c.sqrt_matrix() * s * c.sqrt_matrix())
}

fn random_triple(seed: u64, p: usize, trial: usize) -> (SpdMatrix, SpdMatrix, SpdMatrix) {
    let mut rng = keyed_rng(derive_seed(seed, &[p as u64, trial as u64]), 1);
    (random_spd(&mut rng, p), random_spd(&mut rng, p), random_spd(&mut rng, p))
}

fn invariants_at(p: usize, trials: usize, seed: u64) -> Result<Vec<InvariantCheck>> {
    let names = [
        "exp_log_roundtrip",
        "log_exp_roundtrip",
        "vec_unvec_roundtrip",
        "vec_isometry",
        "transport_preserves_metric",
        "distance_affine_invariance",
    ];
    let mut worst = [0.0_f64; 6];
    for t in 0..trials {
        let mut rng = keyed_rng(derive_seed(seed, &[p as u64, t as u64]), 0);
        let c = random_spd(&mut rng, p);
        let a = random_spd(&mut rng, p);
        let b = random_spd(&mut rng, p);
        let v = random_tangent(&mut rng, &c);
        let w = random_tangent(&mut rng, &c);
        let g = gaussian(&mut rng, p, p, 0.3).exp();

        let back = exp_map(&c, &log_map(&c, &a)?)?;
        let e0 = max_abs(&(back.matrix() - a.matrix()));
        let e1 = max_abs(&(log_map(&c, &exp_map(&c, &v)?)?.matrix() - v.matrix()));
        let cv = vec_at(&c, &v)?;
        let e2 = max_abs(&(unvec_at(&c, &cv)?.matrix() - v.matrix()));
        let e3 = (inner(&c, &v, &w)? - cv.coords().dot(vec_at(&c, &w)?.coords())).abs();
        let pv = parallel_transport(&c, &a, &v)?;
        let pw = parallel_transport(&c, &a, &w)?;
        let e4 = (inner(&a, &pv, &pw)? - inner(&c, &v, &w)?).abs();
        let e5 = (distance(&a.congruence(&g)?, &b.congruence(&g)?)? - distance(&a, &b)?).abs();
        for (slot, e) in worst.iter_mut().zip([e0, e1, e2, e3, e4, e5]) {
            *slot = slot.max(if e.is_nan() { f64::INFINITY } else { e });
        }
    }
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, max_error)| InvariantCheck {
            name,
            p,
            trials,
            max_error,
            tolerance: INVARIANT_TOL,
            passed: max_error <= INVARIANT_TOL,
        })
        .collect())
}

/// The geometric identities (roundtrips, isometry of `vec_at`, transport and
/// affine invariance) over `trials` random draws at each `p`, at `1e-9`.
pub fn geometry_invariants(p_list: &[usize], trials: usize, seed: u64) -> Result<Vec<InvariantCheck>> {
    let mut out = Vec::new();
    for &p in p_list {
        out.extend(invariants_at(p, trials, seed)?);
    }
    Ok(out)
}

fn scalar_rows() -> Result<Vec<ScalarDiscrepancyRow>> {
    let one = SpdMatrix::scalar(1.0)?;
    let a = SpdMatrix::scalar(2f64.exp())?;
    SCALAR_B
        .iter()
        .map(|&b| {
            let bm = SpdMatrix::scalar(b.exp())?;
            let closed_form = jacobi_velocity_closed_form(&one, &a, &bm)?.velocity[(0, 0)];
            let finite_difference = jacobi_velocity_fd(&one, &a, &bm, VELOCITY_H)?[(0, 0)];
            let discrepancy = (closed_form - finite_difference).abs();
            let predicted = ((2.0 - 2.0 * b) - (2.0 * b - 4.0)).abs();
            Ok(ScalarDiscrepancyRow {
                b,
                closed_form,
                finite_difference,
                discrepancy,
                predicted,
                matches: (discrepancy - predicted).abs() <= 1e-6,
            })
        })
        .collect()
}

/// Numerical audit of the geometry layer on random triples `(C, A, B)`.
///
/// Nothing here fails on a bad number: each check is reported with its
/// outcome. The closed-form Jacobi velocity is compared with the
/// finite-difference one but their agreement is not required.
pub fn geometry_audit(p_list: &[usize], trials: usize, seed: u64) -> Result<GeometryAudit> {
    if p_list.is_empty() || p_list.contains(&0) {
        return Err(Error::usage("p list must be non-empty with positive entries"));
    }
    if trials == 0 {
        return Err(Error::usage("at least one trial is required"));
    }
    let invariants = geometry_invariants(p_list, trials, seed)?;
    let mut residual_sweeps = Vec::new();
    let mut richardson = Vec::new();
    let mut discrepancies = Vec::new();
    let mut identical_endpoint_velocity = Vec::new();
    let mut jacobi_endpoint = Vec::new();
    for &p in p_list {
        let mut variations = Vec::with_capacity(trials);
        let mut residuals = vec![Vec::with_capacity(trials); SWEEP_EPS.len()];
        let mut orders = Vec::with_capacity(trials);
        let mut identical: f64 = 0.0;
        let (mut min_end, mut max_gap) = (f64::INFINITY, 0.0_f64);
        for t in 0..trials {
            let (c, a, b) = random_triple(seed, p, t);

            let rs: Vec<f64> = SWEEP_EPS
                .iter()
                .map(|&e| log_difference_residual(&c, &a, &b, e))
                .collect::<Result<_>>()?;
            for (slot, r) in residuals.iter_mut().zip(&rs) {
                slot.push(*r);
            }
            let hi = rs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = rs.iter().copied().fold(f64::INFINITY, f64::min);
            variations.push(if hi > 0.0 { (hi - lo) / hi } else { 0.0 });

            let d1 = jacobi_velocity_fd(&c, &a, &b, RICHARDSON_H)?;
            let d2 = jacobi_velocity_fd(&c, &a, &b, RICHARDSON_H / 2.0)?;
            let d3 = jacobi_velocity_fd(&c, &a, &b, RICHARDSON_H / 4.0)?;
            orders.push(((&d1 - &d2).norm() / (&d2 - &d3).norm()).log2());

            let closed = jacobi_velocity_closed_form(&c, &a, &b)?;
            let fd = jacobi_velocity_fd(&c, &a, &b, VELOCITY_H)?;
            let discrepancy = (&closed.velocity - &fd).norm();
            discrepancies.push(DiscrepancyRow {
                p,
                trial: t,
                closed_form_norm: closed.velocity.norm(),
                finite_difference_norm: fd.norm(),
                discrepancy,
                relative_discrepancy: discrepancy / fd.norm(),
                raw_asymmetry: closed.raw_asymmetry,
                covariant_closed_form_norm: jacobi_covariant_derivative(&c, &a, &b, &closed.velocity)?.norm(),
                covariant_finite_difference_norm: jacobi_covariant_derivative(&c, &a, &b, &fd)?.norm(),
            });

            identical = identical.max(jacobi_velocity_fd(&c, &a, &a, VELOCITY_H)?.norm());

            let end = jacobi_field(&c, &a, &b, 1.0)?;
            min_end = min_end.min(end.matrix().norm());
            max_gap = max_gap.max(max_abs(&(end.matrix() - log_map(&a, &b)?.matrix())));
        }
        let worst_variation = variations.iter().copied().fold(0.0, f64::max);
        residual_sweeps.push(ResidualSweep {
            p,
            triples: trials,
            eps: SWEEP_EPS.to_vec(),
            median_residual: residuals.iter().map(|r| median(r)).collect(),
            worst_variation,
            median_variation: median(&variations),
            passed: worst_variation < SWEEP_MAX_VARIATION,
        });
        let median_order = median(&orders);
        richardson.push(RichardsonCheck {
            p,
            triples: trials,
            h: RICHARDSON_H,
            min_order: orders.iter().copied().fold(f64::INFINITY, f64::min),
            median_order,
            max_order: orders.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            fraction_near_two: orders.iter().filter(|o| (*o - 2.0).abs() <= 0.3).count() as f64 / trials as f64,
            passed: (median_order - 2.0).abs() <= 0.1,
        });
        identical_endpoint_velocity.push((p, identical));
        jacobi_endpoint.push(JacobiEndpointCheck {
            p,
            trials,
            min_endpoint_norm: min_end,
            max_gap_to_log: max_gap,
            vanishing_claim_holds: min_end <= INVARIANT_TOL,
        });
    }
    let invariants_passed = invariants.iter().all(|c| c.passed);
    Ok(GeometryAudit {
        seed,
        p_list: p_list.to_vec(),
        trials,
        invariants,
        residual_sweeps,
        richardson,
        discrepancies,
        scalar_rows: scalar_rows()?,
        identical_endpoint_velocity,
        jacobi_endpoint,
        invariants_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_audit() {
        let audit = geometry_audit(&[2, 3], 5, 7).unwrap();
        assert!(audit.invariants_passed);
        assert_eq!(audit.invariants.len(), 12);
        assert_eq!(audit.discrepancies.len(), 10);
        assert!(audit.scalar_rows.iter().all(|r| r.matches));
        assert!(audit.identical_endpoint_velocity.iter().all(|(_, v)| *v < 1e-12));
        assert!(audit.jacobi_endpoint.iter().all(|j| !j.vanishing_claim_holds && j.max_gap_to_log < 1e-9));
        assert!(geometry_audit(&[], 5, 7).unwrap_err().is_usage());
    }
}
