//! Sparse reduced-rank multi-response regression by sequential sparse
//! generalized eigen-decomposition.
//!
//! The estimator extracts unit-rank factors of the coefficient matrix one at a
//! time from deflated residuals, selects the rank with an information
//! criterion and recovers supports by hard thresholding. Synthetic data
//! generators, evaluation metrics and a VAR network-inference pipeline sit on
//! top.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod netinfer;
pub mod par;
pub mod estimator;
pub mod selection;
pub mod simgen;
pub mod sparse_eig;

pub use error::{Error, Result};
pub use estimator::{fit, predict, SeedConfig, SeedModel, UnitRankFactor, Variant};
pub use linalg::{EigenPair, Matrix};
pub use sparse_eig::{SparsityRule, ThresholdScale};
