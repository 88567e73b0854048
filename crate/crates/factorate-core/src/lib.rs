//! Counterfactual estimation under unobserved confounding via latent factor
//! models and principal component regression.
//!
//! The crate is organized around a simulation-to-estimation pipeline:
//!
//! 1. [`dgp`] draws latent unit factors and builds the ground-truth potential
//!    outcome tensor from one of five outcome families.
//! 2. [`assignment`] generates binary treatment matrices from mechanisms that
//!    may depend on the same latent factors (confounding).
//! 3. [`panel`] assembles observed data and the index machinery the
//!    estimator needs (donor sets, common-treatment measurements).
//! 4. [`pcr`] estimates imputation weights by hard-rank SVD truncation
//!    followed by minimum-norm least squares.
//! 5. [`estimator`] combines observed and imputed sums into the
//!    treatment-effect estimate and its identification bound.
//! 6. [`diagnostics`] computes truth-side oracle targets, oracle weights,
//!    and assumption checkers available only in simulation.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core stays free of
//! IO; file formats, configuration, and the experiment harness live in the
//! companion `factorate` crate.

#![cfg_attr(not(test), no_std)]
// Dense kernels index several arrays per loop; explicit indices read better
// than zipped iterators there.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod assignment;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod math;
pub mod panel;
pub mod pcr;
pub mod rng;

pub use error::{Error, Result};
