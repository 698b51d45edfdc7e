//! Matrix-bundle model: Hermitian `n×n` matrix-valued step functions on
//! `[0,1)` with `τ(x) = ∫ tr(x(t))/n dt`.
//!
//! Cells are diagonalized and the extraction works on (cell, eigen-index)
//! pairs, so the abelian construction carries over with the eigenvalues as
//! the per-cell masses. Everything here is floating point and every
//! identity is checked against a [`Tolerances`] set.

use nalgebra::RealField;
use serde::Serialize;

use crate::scalar::Scalar;

mod basis;
mod extract;
mod matfn;
mod pursuit;

pub use basis::{
    bundle_dense_element, hermitian_unit, run_bundle_stages, verify_bundle_basis, BundleBasisState,
    MATRIX_MODEL, MAX_N,
};
pub use extract::{nc_extract_projection, nc_norming_unitary, MatNormingUnitary};
pub use matfn::{hermitian_eigen, CMatrix, MatStepFn, DEFAULT_TOL_HERM};
pub use nalgebra::Complex;
pub use pursuit::{
    nc_gram_violation, nc_pursue, nc_trace_vector_certificate, BundlePursuit, BundleStep,
};

/// Real scalar usable for matrix cells.
pub trait BundleReal: Scalar + RealField + Copy {}

impl BundleReal for f64 {}
impl BundleReal for f32 {}

pub(crate) fn real_from_usize<R: BundleReal>(n: usize) -> R {
    <R as Scalar>::from_f64(n as f64)
}

/// Tolerances of the toleranced identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Max entrywise `|X - X*|` accepted for an input cell.
    pub herm: f64,
    /// Eigenvalues of `q` may leave `[0, 1]` by this much before clipping.
    pub eig: f64,
    /// Frobenius norm of `P² - P` and `U² - I` per cell.
    pub alg: f64,
    /// Constraint matching, the norming identity and orthogonality of new
    /// unitaries.
    pub matching: f64,
    /// Per-step energy identity `E_k = E_{k-1} - α_k²`.
    pub energy: f64,
    /// Orthogonality required of pursuit inputs and family Gram entries.
    pub orth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: DEFAULT_TOL_HERM,
            eig: 1e-9,
            alg: 1e-10,
            matching: 1e-8,
            energy: 1e-8,
            orth: 1e-8,
        }
    }
}
