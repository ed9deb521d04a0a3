//! Jacobi fields along the geodesic from `C` to `A` generated by moving the
//! far endpoint toward `B`, together with two independent evaluations of their
//! initial velocity.
//!
//! [`jacobi_velocity_closed_form`] evaluates a closed-form
//! expression term by term. [`jacobi_velocity_fd`] differentiates
//! [`jacobi_field`] numerically. The two do not agree in general (already for
//! `p = 1` they give `2 − 2b` and `2b − 4` respectively), so nothing here
//! assumes they do; the geometry audit reports the discrepancy.

use nalgebra::DMatrix;

use super::maps::{geodesic, log_map, parallel_transport};
use super::spd::{symmetrize, SpdMatrix, TangentVector};
use crate::error::{Error, Result};

/// `J(s) = log_{γ(s)}(B) − log_{γ(s)}(A)` with `γ` the geodesic from `C` to `A`.
///
/// The result is based at `γ(s)`. At `s = 1` it equals `log_A(B)`, which
/// vanishes only when `B = A`.
pub fn jacobi_field(c: &SpdMatrix, a: &SpdMatrix, b: &SpdMatrix, s: f64) -> Result<TangentVector> {
    let g = geodesic(c, a, s)?;
    let lb = log_map(&g, b)?;
    let la = log_map(&g, a)?;
    lb.combine(1.0, &la, -1.0)
}

/// Output of [`jacobi_velocity_closed_form`].
#[derive(Debug, Clone)]
pub struct ClosedFormVelocity {
    /// Symmetric part `(M + Mᵀ)/2` of the raw expression `M`.
    pub velocity: DMatrix<f64>,
    /// Frobenius norm of the antisymmetric part `(M − Mᵀ)/2` that was dropped.
    pub raw_asymmetry: f64,
}

/// `−½[X, Y] − ½{X, Y}_C + X` with `X = log_C(A)`, `Y = log_C(B)`,
/// `[X, Y] = XY − YX` and `{X, Y}_C = C⁻¹XY + YXᵀC⁻¹`.
pub fn jacobi_velocity_closed_form(
    c: &SpdMatrix,
    a: &SpdMatrix,
    b: &SpdMatrix,
) -> Result<ClosedFormVelocity> {
    let x = log_map(c, a)?.into_matrix();
    let y = log_map(c, b)?.into_matrix();
    let c_inv = c.inverse();
    let commutator = &x * &y - &y * &x;
    let sym_product = &c_inv * &x * &y + &y * x.transpose() * &c_inv;
    let raw = commutator * -0.5 - sym_product * 0.5 + &x;
    let raw_asymmetry = ((&raw - raw.transpose()) * 0.5).norm();
    Ok(ClosedFormVelocity {
        velocity: symmetrize(&raw),
        raw_asymmetry,
    })
}

/// Central difference `(J(h) − J(−h)) / 2h` of [`jacobi_field`] in ambient
/// matrix coordinates; `h` must lie in `(0, 0.1]`.
pub fn jacobi_velocity_fd(c: &SpdMatrix, a: &SpdMatrix, b: &SpdMatrix, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h <= 0.1) {
        return Err(Error::usage(format!("finite-difference step {h} outside (0, 0.1]")));
    }
    let plus = jacobi_field(c, a, b, h)?.into_matrix();
    let minus = jacobi_field(c, a, b, -h)?.into_matrix();
    Ok((plus - minus) / (2.0 * h))
}

/// `J̇(0) − ½(C⁻¹ γ̇(0) J(0) + J(0) γ̇(0)ᵀ C⁻¹)` with `J(0) = log_C(B) − log_C(A)`
/// and `γ̇(0) = log_C(A)`; `velocity` is a candidate `J̇(0)` from either routine.
pub fn jacobi_covariant_derivative(
    c: &SpdMatrix,
    a: &SpdMatrix,
    b: &SpdMatrix,
    velocity: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if velocity.shape() != (c.dim(), c.dim()) {
        return Err(Error::usage("velocity has the wrong shape"));
    }
    let gdot = log_map(c, a)?.into_matrix();
    let j0 = log_map(c, b)?.into_matrix() - &gdot;
    let c_inv = c.inverse();
    let correction = (&c_inv * &gdot * &j0 + &j0 * gdot.transpose() * &c_inv) * 0.5;
    Ok(symmetrize(&(velocity - correction)))
}

/// `‖log_{γ(ε)}(B) − Π_{C→γ(ε)}[log_C(B) − log_C(A)] − log_{γ(ε)}(A)‖_F / ε`.
///
/// Tends to the norm of the covariant derivative of the Jacobi field, so it
/// stays bounded as `ε → 0`.
pub fn log_difference_residual(c: &SpdMatrix, a: &SpdMatrix, b: &SpdMatrix, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::usage(format!("eps {eps} outside (0, 0.5]")));
    }
    let g = geodesic(c, a, eps)?;
    let j0 = log_map(c, b)?.combine(1.0, &log_map(c, a)?, -1.0)?;
    let transported = parallel_transport(c, &g, &j0)?;
    let combo = log_map(&g, b)?.into_matrix() - transported.matrix() - log_map(&g, a)?.matrix();
    Ok(combo.norm() / eps)
}
