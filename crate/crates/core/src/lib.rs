//! Bayesian variable selection for linear regression with empirical-Bayes
//! model priors driven by per-covariate meta-covariates.
//!
//! The crate is organised bottom-up:
//!
//! - [`linmodel`]: Zellner-prior marginal likelihoods and model averaging.
//! - [`priors`]: model-space priors and the calibrated Gaussian hyperprior on `ω`.
//! - [`sampler`]: Gibbs sampling and exact enumeration over models.
//! - [`ebayes`]: EM for `ω` with Newton or closed-form M-steps, plus the two-step
//!   block estimator and a joint `(γ, ω)` sampler.
//! - [`harness`]: simulation studies and design diagnostics.
//! - [`pipeline`]: end-to-end fitting used by the harness and the CLI.

pub mod ebayes;
pub mod error;
pub mod harness;
pub mod linmodel;
pub mod math;
pub mod pipeline;
pub mod priors;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
