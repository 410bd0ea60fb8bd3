//! Edge-element laboratory for acoustically modulated electromagnetic boundary
//! measurements and current-density reconstruction in a 2D disk.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod forward;
pub mod internal;
pub mod linsolve;
pub mod medium;
pub mod mesh;
pub mod output;
pub mod pipeline;
pub mod quadrature;
pub mod reconstruct;
pub mod scenario;
pub mod validate;

pub use error::{Error, ErrorKind, Result};
pub use num_complex::Complex64;
