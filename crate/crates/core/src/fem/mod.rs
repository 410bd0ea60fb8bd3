//! Lowest-order edge elements: basis, assembly, constraints, evaluation and norms.

mod assembly;
pub mod basis;
mod field;
pub mod sparse;

use thiserror::Error;

pub use assembly::{
    apply_dirichlet_tangential, assemble_boundary_load, assemble_boundary_mass, assemble_curl_curl, assemble_forms,
    assemble_load, assemble_mass, ConstrainedSystem, Forms, PointCoefficients,
};
pub use basis::{ref_basis_eval, QuadratureCache};
pub use field::{
    evaluate_curl, evaluate_field, hcurl_norm, interpolate, interpolate_gradient, l2_norm, l2_norm_samples,
    l2_norm_scalar, relative_hcurl_error, relative_l2_error, relative_l2_error_samples, FieldFE,
};
pub use sparse::{SparseMatrix, SparsityPattern};

#[derive(Debug, Error, PartialEq)]
pub enum FemError {
    #[error("coefficient is not finite inside element {element}")]
    NonFiniteCoefficient { element: usize },
    #[error("sample is not finite inside element {element}")]
    NonFiniteSample { element: usize },
    #[error("invalid boundary data: {0}")]
    BoundaryData(String),
    #[error("reference field has zero norm")]
    ZeroNorm,
    #[error("expected {expected} coefficients, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}
