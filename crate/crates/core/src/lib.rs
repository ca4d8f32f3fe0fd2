//! Numerical checks for quantitative Gaussian isoperimetry on weighted
//! intervals and needle ensembles.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod measure1d;
pub mod needles;
pub mod numerics;
pub mod rates;
pub mod stability;

pub use error::{Error, Result};
