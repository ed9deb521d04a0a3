use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

/// Serializes a matrix as a list of rows.
pub(crate) fn matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

pub(crate) fn vector<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

pub(crate) fn tangent<S: Serializer>(v: &crate::geometry::TangentVector, s: S) -> Result<S::Ok, S::Error> {
    matrix(v.matrix(), s)
}
