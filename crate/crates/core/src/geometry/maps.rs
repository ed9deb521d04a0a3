use nalgebra::{DMatrix, DVector};

use super::spd::{
    sym_eigen, sym_fn, symmetrize, tangent_dim, SpdMatrix, TangentCoords, TangentVector,
};
use crate::error::{Error, Result};

fn check_same_dim(c: &SpdMatrix, a: &SpdMatrix) -> Result<()> {
    if c.dim() != a.dim() {
        return Err(Error::usage(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            c.dim(),
            c.dim(),
            a.dim(),
            a.dim()
        )));
    }
    Ok(())
}

fn check_base(c: &SpdMatrix, v: &TangentVector) -> Result<()> {
    check_same_dim(c, v.base())?;
    if !c.same_point(v.base()) {
        return Err(Error::usage("tangent vector is not based at the given point"));
    }
    Ok(())
}

/// `C^{-1/2} A C^{-1/2}`.
pub(crate) fn whiten(c: &SpdMatrix, a: &DMatrix<f64>) -> DMatrix<f64> {
    let is = c.inv_sqrt_matrix();
    symmetrize(&(is * a * is))
}

/// `C^{1/2} X C^{1/2}`.
pub(crate) fn unwhiten(c: &SpdMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let s = c.sqrt_matrix();
    symmetrize(&(s * x * s))
}

/// `log(C^{-1/2} A C^{-1/2})`, the logarithm map expressed at the identity.
///
/// `vec_at(C, log_map(C, A))` equals `vec_at_identity` of this matrix, which
/// is how the estimators avoid the extra conjugations.
pub(crate) fn whitened_log(c: &SpdMatrix, a: &SpdMatrix) -> DMatrix<f64> {
    sym_fn(&whiten(c, a.matrix()), f64::ln)
}

/// Principal square root `S` with `S·S = C`.
pub fn spd_sqrt(c: &SpdMatrix) -> Result<SpdMatrix> {
    SpdMatrix::from_computed(c.sqrt_matrix().clone())
}

/// Riemannian logarithm `log_C(A) = C^{1/2} log(C^{-1/2} A C^{-1/2}) C^{1/2}`.
pub fn log_map(c: &SpdMatrix, a: &SpdMatrix) -> Result<TangentVector> {
    check_same_dim(c, a)?;
    let l = whitened_log(c, a);
    Ok(TangentVector::from_parts(c.clone(), unwhiten(c, &l)))
}

/// Riemannian exponential `exp_C(V) = C^{1/2} exp(C^{-1/2} V C^{-1/2}) C^{1/2}`.
pub fn exp_map(c: &SpdMatrix, v: &TangentVector) -> Result<SpdMatrix> {
    check_base(c, v)?;
    let e = sym_fn(&whiten(c, v.matrix()), f64::exp);
    SpdMatrix::from_computed(unwhiten(c, &e))
        .map_err(|e| Error::numeric(format!("exponential map left the manifold: {e}")))
}

/// Point `γ(s) = C^{1/2}(C^{-1/2} A C^{-1/2})^s C^{1/2}` on the geodesic from
/// `C` (at `s = 0`) to `A` (at `s = 1`). Any real `s` is allowed.
pub fn geodesic(c: &SpdMatrix, a: &SpdMatrix, s: f64) -> Result<SpdMatrix> {
    check_same_dim(c, a)?;
    let m = sym_fn(&whiten(c, a.matrix()), |l| l.powf(s));
    SpdMatrix::from_computed(unwhiten(c, &m))
        .map_err(|e| Error::numeric(format!("geodesic point left the manifold: {e}")))
}

/// Geodesic distance `‖log(C^{-1/2} A C^{-1/2})‖_F`.
pub fn distance(c: &SpdMatrix, a: &SpdMatrix) -> Result<f64> {
    check_same_dim(c, a)?;
    Ok(squared_distance_unchecked(c, a).sqrt())
}

pub(crate) fn squared_distance_unchecked(c: &SpdMatrix, a: &SpdMatrix) -> f64 {
    let (vals, _) = sym_eigen(&whiten(c, a.matrix()));
    vals.iter().map(|l| l.ln().powi(2)).sum()
}

/// AIRM inner product `tr(C^{-1} V C^{-1} W)`.
pub fn inner(c: &SpdMatrix, v: &TangentVector, w: &TangentVector) -> Result<f64> {
    check_base(c, v)?;
    check_base(c, w)?;
    let vw = whiten(c, v.matrix());
    let ww = whiten(c, w.matrix());
    Ok(vw.dot(&ww))
}

/// Norm of a tangent vector at its own base point.
pub fn norm(v: &TangentVector) -> f64 {
    whiten(v.base(), v.matrix()).norm()
}

/// `(w11, √2 w12, w22, √2 w13, √2 w23, w33, …)`: column-major over the upper
/// triangle with `√2` on off-diagonal entries.
pub fn vec_at_identity(w: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !w.is_square() {
        return Err(Error::usage("vectorization needs a square matrix"));
    }
    if super::spd::relative_asymmetry(w) > crate::tolerances::SYMMETRY_REL {
        return Err(Error::usage("vectorization needs a symmetric matrix"));
    }
    Ok(vec_identity_unchecked(w))
}

pub(crate) fn vec_identity_unchecked(w: &DMatrix<f64>) -> DVector<f64> {
    let p = w.nrows();
    let mut out = DVector::zeros(tangent_dim(p));
    let mut k = 0;
    for j in 0..p {
        for i in 0..=j {
            out[k] = if i == j {
                w[(i, j)]
            } else {
                std::f64::consts::SQRT_2 * 0.5 * (w[(i, j)] + w[(j, i)])
            };
            k += 1;
        }
    }
    out
}

/// Inverse of [`vec_at_identity`].
pub fn unvec_at_identity(x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let p = super::spd::matrix_dim(x.len()).ok_or_else(|| {
        Error::usage(format!(
            "{} coordinates do not match any p(p+1)/2",
            x.len()
        ))
    })?;
    Ok(unvec_identity_unchecked(x, p))
}

pub(crate) fn unvec_identity_unchecked(x: &DVector<f64>, p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    let mut k = 0;
    for j in 0..p {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = x[k];
            } else {
                let v = x[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            k += 1;
        }
    }
    m
}

/// `Vec_C(V) = Vec_I(C^{-1/2} V C^{-1/2})`, a linear isometry onto `ℝ^d`.
pub fn vec_at(c: &SpdMatrix, v: &TangentVector) -> Result<TangentCoords> {
    check_base(c, v)?;
    TangentCoords::new(c.clone(), vec_identity_unchecked(&whiten(c, v.matrix())))
}

/// Inverse of [`vec_at`].
pub fn unvec_at(c: &SpdMatrix, x: &TangentCoords) -> Result<TangentVector> {
    if !c.same_point(x.base()) {
        return Err(Error::usage("coordinates are not based at the given point"));
    }
    let d = tangent_dim(c.dim());
    if x.coords().len() != d {
        return Err(Error::usage(format!(
            "expected {d} coordinates, got {}",
            x.coords().len()
        )));
    }
    let w = unvec_identity_unchecked(x.coords(), c.dim());
    Ok(TangentVector::from_parts(c.clone(), unwhiten(c, &w)))
}

/// `E = (A C^{-1})^{1/2} = C^{1/2} (C^{-1/2} A C^{-1/2})^{1/2} C^{-1/2}`.
pub(crate) fn transport_operator(c: &SpdMatrix, a: &SpdMatrix) -> DMatrix<f64> {
    let m = sym_fn(&whiten(c, a.matrix()), f64::sqrt);
    c.sqrt_matrix() * m * c.inv_sqrt_matrix()
}

/// Parallel transport along the geodesic from `C` to `A`: `V ↦ E V Eᵀ` with
/// `E = (A C^{-1})^{1/2}`.
pub fn parallel_transport(
    c: &SpdMatrix,
    a: &SpdMatrix,
    v: &TangentVector,
) -> Result<TangentVector> {
    check_same_dim(c, a)?;
    check_base(c, v)?;
    let e = transport_operator(c, a);
    Ok(TangentVector::from_parts(
        a.clone(),
        &e * v.matrix() * e.transpose(),
    ))
}
