//! Spectral deferred corrections for second-order initial value problems.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod collocation;
pub mod error;
pub mod harness;
pub mod preconditioner;
pub mod problems;
pub mod quadrature;
pub mod sdc;
pub mod stability;

pub use error::{Result, SdcError};
