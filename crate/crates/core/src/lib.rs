//! Orthonormal bases of self-adjoint unitaries, built constructively in two
//! concrete tracial models.
//!
//! * The abelian model: real step functions on `[0,1)` with
//!   `τ(f) = ∫₀¹ f dt`, generic over the value scalar ([`Rational`] for exact
//!   certificates, `f64`/`f32` for fast approximate runs).
//! * The matrix-bundle model ([`bundle`]): Hermitian-matrix-valued step
//!   functions with the normalized trace `∫₀¹ tr(X)/n dt`.
//!
//! The pipeline is the same in both: extract a projection with prescribed
//! trace pairings ([`lyapunov`]), turn it into the norming unitary of a
//! residual, peel unitaries off greedily ([`pursuit`]), and drive the pursuit
//! over a dense family and all dyadic precisions ([`basis`]).

pub mod basis;
pub mod bundle;
pub mod error;
pub mod family;
pub mod lyapunov;
pub mod pursuit;
pub mod scalar;
pub mod stepfn;
pub mod vertex;

pub use basis::{
    dense_element, pair_index, run_stages, trace_vector_certificate, verify_basis,
    verify_basis_with_jobs, BasisReport, BasisState, CertificateStatus, StageOptions,
};
pub use error::{Error, Result};
pub use family::OrthoFamily;
pub use lyapunov::{extract_projection, norming_unitary, NormingUnitary, SplitRule};
pub use pursuit::{
    iteration_bound, minimal_iteration_count, pursue, Check, Pursuit, PursuitOptions, PursuitTrace,
};
pub use scalar::{Rational, Scalar};
pub use stepfn::{canonicalize, common_refinement, ProjectionFn, SAUnitaryFn, StepFn};

/// Exact abelian model.
pub type ExactStepFn = StepFn<Rational>;
pub type ExactUnitary = SAUnitaryFn<Rational>;
pub type ExactFamily = OrthoFamily<Rational>;
pub type ExactBasis = BasisState<Rational>;

/// Double-precision abelian model.
pub type FloatStepFn = StepFn<f64>;
pub type FloatUnitary = SAUnitaryFn<f64>;
pub type FloatFamily = OrthoFamily<f64>;

/// Single-precision abelian model.
pub type StepFn32 = StepFn<f32>;

/// Double-precision matrix-bundle model.
pub type MatStepFn64 = bundle::MatStepFn<f64>;
pub type BundleBasis64 = bundle::BundleBasisState<f64>;
