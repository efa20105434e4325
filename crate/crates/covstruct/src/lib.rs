//! Tests for structural hypotheses on covariance and correlation matrices.
//!
//! Given an i.i.d. sample of d-variate observations, this crate tests whether
//! the underlying covariance matrix follows a structural model (diagonal,
//! spherical, compound symmetry, Toeplitz, autoregressive, scaled
//! autoregressive) or whether the correlation matrix does (heterogeneous
//! compound symmetry / Toeplitz / autoregressive). The test statistic is a
//! quadratic form in the vectorized covariance estimator, normalized by the
//! trace of its estimated covariance; critical values come from a weighted
//! chi-square Monte-Carlo approximation or from parametric bootstrap
//! resampling. A multiple-contrast procedure splits a global sphericity
//! decision into equal-diagonal and off-diagonal sub-decisions, and a
//! companion mean test is included for workflows that check the mean vector
//! first.
//!
//! Module map:
//! - [`mat`]: bands-first vectorization layouts and small matrix helpers
//! - [`structures`]: constructors for structured covariance matrices
//! - [`hypothesis`]: contrast matrices and the band transforms
//! - [`moments`]: sample moment estimators on covariance and correlation level
//! - [`engine`]: the test statistic and its Monte-Carlo / bootstrap calibration
//! - [`mctp`]: the multiple-contrast sphericity procedure
//! - [`hotelling`]: the companion mean-vector test
//! - [`sim`]: scenario-driven simulation harness (type-I error and power)

pub mod engine;
pub mod error;
pub mod hotelling;
pub mod hypothesis;
pub mod mat;
pub mod mctp;
pub mod moments;
pub mod rng;
pub mod sim;
pub mod special;
pub mod structures;

pub use error::{Error, Result};
