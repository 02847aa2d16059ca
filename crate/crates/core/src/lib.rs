//! Riemannian geometry of Hermitian positive-definite matrices and the
//! matrix-CFAR detection pipeline built on it.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod detect;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod montecarlo;
pub mod randmat;
pub mod robustness;
pub mod signal;

pub use error::{Error, Result};
pub use linalg::{HermitianMatrix, HpdMatrix};
