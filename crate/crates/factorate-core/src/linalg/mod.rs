//! Dense real linear algebra the estimator is built on: SVD, rank
//! truncation, truncated pseudo-inverse, minimum-norm least squares, and
//! best-rank-r approximation error.
//!
//! All values are immutable after construction and safe to share across
//! threads; every operation is a pure function of its inputs.

mod matrix;
mod ops;
mod svd;

pub use matrix::RealMatrix;
pub use ops::{
    default_zero_tol, min_norm_least_squares, rank_r_max_error, truncate, truncated_pinv,
};
pub use svd::{svd, SvdFactors};
