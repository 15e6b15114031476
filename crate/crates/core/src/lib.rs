//! Numerical laboratory for bulk eigenvalue statistics of complex sample
//! covariance matrices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod fredholm;
pub mod kernel;
pub mod mp;
pub mod quad;
pub mod specfun;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
