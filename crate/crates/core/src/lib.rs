//! Extreme value toolkit.
//!
//! Four estimation frameworks share one set of distribution and optimisation
//! primitives:
//!
//! - [`marginal`]: covariate-dependent peaks-over-threshold regression with an
//!   additive quantile-regression threshold, GPD regression above it, threshold
//!   level selection and bootstrap intervals for conditional quantiles.
//! - [`nbe`]: a DeepSets neural Bayes estimator for a single extreme quantile,
//!   trained under a conservative asymmetric loss.
//! - [`condex`]: covariate-dependent conditional extremes models on Laplace
//!   margins and Monte Carlo estimation of joint exceedance probabilities.
//! - [`tailprob`]: extremal dependence clustering and a non-parametric
//!   estimator of multivariate tail probabilities.
//!
//! Every stochastic routine takes its random generator explicitly; see
//! [`numopt::rng`].

pub mod condex;
pub mod dataset;
pub mod distributions;
mod error;
pub mod marginal;
pub mod nbe;
pub mod numopt;
pub mod stats;
pub mod synthetic;
pub mod tailprob;

pub use error::{Error, Result};
