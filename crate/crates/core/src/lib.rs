//! Nonparametric Bayesian inference on the joint tail of a bivariate
//! distribution.
//!
//! The dependence structure is a spectral measure from a dense family of
//! spline-smoothed measures; margins follow a threshold-anchored
//! extreme-value form. A reversible-jump sampler explores the joint posterior
//! under a censored likelihood, and the resulting trace feeds predictive tail
//! densities, rare-event probabilities and conditional quantiles.

pub mod error;
pub mod mcmc;
pub mod predictive;
pub mod prior;
pub mod quadrature;
pub mod spectral;
pub mod spline;
pub mod synthetic;
pub mod tail;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
