use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tolerances::{Tolerances, MIN_EIGEN_RATIO, SYMMETRY_REL};

/// Dimension `d = p(p+1)/2` of the tangent space of `p×p` SPD matrices.
pub fn tangent_dim(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Inverse of [`tangent_dim`]; `None` if `d` is not a triangular number.
pub fn matrix_dim(d: usize) -> Option<usize> {
    let mut p = 0;
    while tangent_dim(p) < d {
        p += 1;
    }
    (tangent_dim(p) == d && d > 0).then_some(p)
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest asymmetry relative to the largest entry (0 for the zero matrix).
pub(crate) fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(m - m.transpose())) / scale
}

pub(crate) fn relative_symmetry_ok(m: &DMatrix<f64>) -> bool {
    relative_asymmetry(m) <= SYMMETRY_REL
}

/// Symmetric eigendecomposition of an (already symmetric) matrix.
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// `Q f(Λ) Qᵀ`.
pub(crate) fn spectral_apply(
    vals: &DVector<f64>,
    vecs: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fl = f(l);
        scaled.column_mut(j).scale_mut(fl);
    }
    symmetrize(&(scaled * vecs.transpose()))
}

/// Applies a scalar function to a symmetric matrix through its eigendecomposition.
pub(crate) fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(&symmetrize(m));
    spectral_apply(&vals, &vecs, f)
}

pub(crate) fn matrices_match(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    let scale = max_abs(a).max(max_abs(b)).max(f64::MIN_POSITIVE);
    max_abs(&(a - b)) <= SYMMETRY_REL * scale
}

struct Inner {
    mat: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

/// A symmetric positive definite matrix, a point on the SPD manifold.
///
/// The eigendecomposition, square root and inverse square root are computed
/// once at construction. Cloning is cheap (shared, immutable storage).
#[derive(Clone)]
pub struct SpdMatrix(Arc<Inner>);

impl SpdMatrix {
    /// Validates symmetry and strict positive definiteness with default tolerances.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerances(mat, &Tolerances::default())
    }

    pub fn with_tolerances(mat: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::usage(format!(
                "expected a non-empty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotSpd("matrix has non-finite entries".into()));
        }
        let asym = relative_asymmetry(&mat);
        if asym > tol.symmetry_rel {
            return Err(Error::NotSpd(format!(
                "relative asymmetry {asym:.3e} exceeds {:.1e}",
                tol.symmetry_rel
            )));
        }
        Self::from_symmetric(symmetrize(&mat), tol.min_eigen_ratio)
    }

    /// Builds from a matrix that is symmetric up to rounding (the result of an
    /// internal computation); only the eigenvalue condition is enforced.
    pub(crate) fn from_computed(mat: DMatrix<f64>) -> Result<Self> {
        Self::from_symmetric(symmetrize(&mat), MIN_EIGEN_RATIO)
    }

    fn from_symmetric(mat: DMatrix<f64>, min_ratio: f64) -> Result<Self> {
        let (eigenvalues, eigenvectors) = sym_eigen(&mat);
        let max = eigenvalues.max();
        let min = eigenvalues.min();
        if !(min > 0.0) || min < min_ratio * max {
            return Err(Error::NotSpd(format!(
                "smallest eigenvalue {min:.3e} is not above {min_ratio:.0e} x largest ({max:.3e})"
            )));
        }
        let sqrt = spectral_apply(&eigenvalues, &eigenvectors, f64::sqrt);
        let inv_sqrt = spectral_apply(&eigenvalues, &eigenvectors, |l| 1.0 / l.sqrt());
        Ok(SpdMatrix(Arc::new(Inner {
            mat,
            eigenvalues,
            eigenvectors,
            sqrt,
            inv_sqrt,
        })))
    }

    pub fn identity(p: usize) -> Self {
        Self::new(DMatrix::identity(p, p)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// A `1×1` SPD matrix.
    pub fn scalar(c: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, c))
    }

    /// Builds from row-major entries of a `p×p` matrix.
    pub fn from_row_slice(p: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * p {
            return Err(Error::usage(format!(
                "expected {} entries for a {p}x{p} matrix, got {}",
                p * p,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(p, p, entries))
    }

    /// `p`.
    pub fn dim(&self) -> usize {
        self.0.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0.mat
    }

    /// Eigenvalues in the order returned by the symmetric eigensolver.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.0.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.0.eigenvectors
    }

    /// `C^{1/2}`.
    pub fn sqrt_matrix(&self) -> &DMatrix<f64> {
        &self.0.sqrt
    }

    /// `C^{-1/2}`.
    pub fn inv_sqrt_matrix(&self) -> &DMatrix<f64> {
        &self.0.inv_sqrt
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.spectral(|l| 1.0 / l)
    }

    /// `C^s` for real `s`.
    pub fn power(&self, s: f64) -> DMatrix<f64> {
        self.spectral(|l| l.powf(s))
    }

    /// Principal matrix logarithm.
    pub fn log_matrix(&self) -> DMatrix<f64> {
        self.spectral(f64::ln)
    }

    pub fn log_det(&self) -> f64 {
        self.0.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    fn spectral(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        spectral_apply(&self.0.eigenvalues, &self.0.eigenvectors, f)
    }

    /// `G C Gᵀ` for an invertible `G`.
    pub fn congruence(&self, g: &DMatrix<f64>) -> Result<Self> {
        if g.shape() != (self.dim(), self.dim()) {
            return Err(Error::usage(format!(
                "congruence by {}x{} matrix on a {}x{} point",
                g.nrows(),
                g.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        Self::from_computed(g * self.matrix() * g.transpose())
    }

    pub(crate) fn same_point(&self, other: &SpdMatrix) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || matrices_match(self.matrix(), other.matrix())
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.mat == other.0.mat
    }
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpdMatrix").field(&self.0.mat).finish()
    }
}

/// Serialized as a list of rows.
impl Serialize for SpdMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::serde_util::matrix(&self.0.mat, s)
    }
}

/// A symmetric matrix tagged with the SPD point whose tangent space it lives in.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: SpdMatrix,
    mat: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: SpdMatrix, mat: DMatrix<f64>) -> Result<Self> {
        if mat.shape() != (base.dim(), base.dim()) {
            return Err(Error::usage(format!(
                "tangent matrix is {}x{} but base point is {}x{}",
                mat.nrows(),
                mat.ncols(),
                base.dim(),
                base.dim()
            )));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("tangent matrix has non-finite entries"));
        }
        let asym = relative_asymmetry(&mat);
        if asym > SYMMETRY_REL {
            return Err(Error::usage(format!(
                "tangent matrix relative asymmetry {asym:.3e} exceeds {SYMMETRY_REL:.0e}"
            )));
        }
        Ok(Self::from_parts(base, mat))
    }

    /// Symmetrizes without validation; used for internally computed matrices.
    pub(crate) fn from_parts(base: SpdMatrix, mat: DMatrix<f64>) -> Self {
        let mat = symmetrize(&mat);
        TangentVector { base, mat }
    }

    pub fn zero(base: SpdMatrix) -> Self {
        let p = base.dim();
        TangentVector {
            base,
            mat: DMatrix::zeros(p, p),
        }
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn scale(&self, a: f64) -> Self {
        TangentVector {
            base: self.base.clone(),
            mat: &self.mat * a,
        }
    }

    /// `a·self + b·other`; both must share a base point.
    pub fn combine(&self, a: f64, other: &TangentVector, b: f64) -> Result<Self> {
        if !self.base.same_point(&other.base) {
            return Err(Error::usage("tangent vectors live at different base points"));
        }
        Ok(TangentVector {
            base: self.base.clone(),
            mat: &self.mat * a + &other.mat * b,
        })
    }
}

/// Coordinates of a tangent vector under the vectorization isometry.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentCoords {
    base: SpdMatrix,
    coords: DVector<f64>,
}

impl TangentCoords {
    pub fn new(base: SpdMatrix, coords: DVector<f64>) -> Result<Self> {
        let d = tangent_dim(base.dim());
        if coords.len() != d {
            return Err(Error::usage(format!(
                "expected {d} tangent coordinates for p = {}, got {}",
                base.dim(),
                coords.len()
            )));
        }
        Ok(TangentCoords { base, coords })
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }
}
