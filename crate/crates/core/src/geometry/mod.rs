//! Affine-invariant geometry of the SPD manifold.
//!
//! Points are [`SpdMatrix`] values; tangent vectors are symmetric matrices
//! tagged with their base point. All maps are evaluated in closed form through
//! symmetric eigendecompositions:
//!
//! | map | formula |
//! |-----|---------|
//! | `log_map(C, A)` | `C^{1/2} log(C^{-1/2} A C^{-1/2}) C^{1/2}` |
//! | `exp_map(C, V)` | `C^{1/2} exp(C^{-1/2} V C^{-1/2}) C^{1/2}` |
//! | `distance(C, A)` | `‖log(C^{-1/2} A C^{-1/2})‖_F` |
//! | `inner(C, V, W)` | `tr(C⁻¹ V C⁻¹ W)` |
//! | `vec_at(C, V)` | `Vec_I(C^{-1/2} V C^{-1/2})` |
//! | `parallel_transport(C, A, V)` | `E V Eᵀ`, `E = (A C⁻¹)^{1/2}` |

mod jacobi;
mod maps;
mod spd;

pub use jacobi::{
    jacobi_covariant_derivative, jacobi_field, jacobi_velocity_closed_form, jacobi_velocity_fd,
    log_difference_residual, ClosedFormVelocity,
};
pub use maps::{
    distance, exp_map, geodesic, inner, log_map, norm, parallel_transport, spd_sqrt, unvec_at,
    unvec_at_identity, vec_at, vec_at_identity,
};
pub use spd::{matrix_dim, tangent_dim, SpdMatrix, TangentCoords, TangentVector};

pub(crate) use maps::{
    squared_distance_unchecked, unvec_identity_unchecked, unwhiten, vec_identity_unchecked,
    whitened_log,
};
pub(crate) use spd::{max_abs, relative_symmetry_ok, spectral_apply, sym_eigen, sym_fn, symmetrize};
