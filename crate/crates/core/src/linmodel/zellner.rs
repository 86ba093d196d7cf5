//! Closed-form marginal likelihoods under Zellner's coefficient prior
//!
//! ```text
//! y | θ_γ, φ, γ ~ N(X_γ θ_γ, φ I)
//! θ_γ | φ, γ    ~ N(0, g φ (X_γᵀX_γ / n)⁻¹)
//! ```
//!
//! Integrating `θ_γ` gives `y | φ, γ ~ N(0, φ (I + g n P_γ))`, whose log
//! determinant is `|γ| log(1 + g n)` and whose precision is
//! `I − s P_γ` with shrinkage `s = g n / (1 + g n)`. Everything therefore
//! depends on the data only through `yᵀy` and the fitted sum of squares
//! `yᵀ P_γ y`.
//!
//! For unknown variance, `φ ~ InvGamma(a0/2, b0/2)` (shape `a0/2`, rate
//! `b0/2`). With the default `a0 = b0 = 0.01` this is the usual
//! "inverse gamma(0.01, 0.01)" default in the `(a0, b0)` parameterization.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use super::fit::{least_squares_fit, FitResult};
use super::{Dataset, ModelIndicator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMode {
    Known { phi: f64 },
    /// `φ ~ InvGamma(shape = a0/2, rate = b0/2)`.
    InverseGamma { a0: f64, b0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZellnerConfig {
    pub g_theta: f64,
    pub variance: VarianceMode,
}

impl Default for ZellnerConfig {
    fn default() -> Self {
        ZellnerConfig {
            g_theta: 1.0,
            variance: VarianceMode::InverseGamma { a0: 0.01, b0: 0.01 },
        }
    }
}

impl ZellnerConfig {
    pub fn known(g_theta: f64, phi: f64) -> Self {
        ZellnerConfig {
            g_theta,
            variance: VarianceMode::Known { phi },
        }
    }

    pub fn inverse_gamma(g_theta: f64, a0: f64, b0: f64) -> Self {
        ZellnerConfig {
            g_theta,
            variance: VarianceMode::InverseGamma { a0, b0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_theta > 0.0) || !self.g_theta.is_finite() {
            return Err(Error::InvalidHyper(format!(
                "g_theta must be positive and finite, got {}",
                self.g_theta
            )));
        }
        match self.variance {
            VarianceMode::Known { phi } if !(phi > 0.0) => Err(Error::NonPositiveVariance(phi)),
            VarianceMode::InverseGamma { a0, b0 } if !(a0 > 0.0) || !(b0 > 0.0) => Err(
                Error::InvalidHyper(format!("inverse-gamma a0, b0 must be positive, got {a0}, {b0}")),
            ),
            _ => Ok(()),
        }
    }

    /// `g n / (1 + g n)`, the factor multiplying least-squares coefficients
    /// in the posterior mean.
    pub fn shrinkage(&self, n: usize) -> f64 {
        let gn = self.g_theta * n as f64;
        gn / (1.0 + gn)
    }
}

/// `log p(y | γ)` from the sufficient statistics `(n, |γ|, yᵀy, yᵀP_γy)`.
pub fn log_marginal_from_fit(
    n: usize,
    size: usize,
    yty: f64,
    fitted_sumsq: f64,
    cfg: &ZellnerConfig,
) -> f64 {
    let nf = n as f64;
    let gn = cfg.g_theta * nf;
    let penalty = 0.5 * size as f64 * gn.ln_1p();
    let quad = yty - gn / (1.0 + gn) * fitted_sumsq;
    match cfg.variance {
        VarianceMode::Known { phi } => {
            -0.5 * nf * (2.0 * PI * phi).ln() - penalty - quad / (2.0 * phi)
        }
        VarianceMode::InverseGamma { a0, b0 } => {
            let shape = 0.5 * (a0 + nf);
            ln_gamma(shape) - ln_gamma(0.5 * a0) + 0.5 * a0 * (0.5 * b0).ln()
                - 0.5 * nf * (2.0 * PI).ln()
                - penalty
                - shape * (0.5 * (b0 + quad)).ln()
        }
    }
}

/// Log marginal likelihood with known error variance.
pub fn log_marginal_known_var(
    dataset: &Dataset,
    gamma: &ModelIndicator,
    cfg: &ZellnerConfig,
) -> Result<f64> {
    cfg.validate()?;
    if !matches!(cfg.variance, VarianceMode::Known { .. }) {
        return Err(Error::InvalidConfig(
            "known-variance marginal requested with an inverse-gamma variance prior".into(),
        ));
    }
    let fit = least_squares_fit(dataset, gamma)?;
    Ok(log_marginal_from_fit(
        dataset.n(),
        gamma.size(),
        fit.fitted_sumsq + fit.residual_sumsq,
        fit.fitted_sumsq,
        cfg,
    ))
}

/// Log marginal likelihood with `φ` integrated against its inverse-gamma prior.
pub fn log_marginal_unknown_var(
    dataset: &Dataset,
    gamma: &ModelIndicator,
    cfg: &ZellnerConfig,
) -> Result<f64> {
    cfg.validate()?;
    if !matches!(cfg.variance, VarianceMode::InverseGamma { .. }) {
        return Err(Error::InvalidConfig(
            "unknown-variance marginal requested with a known variance".into(),
        ));
    }
    let fit = least_squares_fit(dataset, gamma)?;
    Ok(log_marginal_from_fit(
        dataset.n(),
        gamma.size(),
        fit.fitted_sumsq + fit.residual_sumsq,
        fit.fitted_sumsq,
        cfg,
    ))
}

/// `E[θ_γ | y, γ]`, the least-squares estimate shrunk by `g n / (1 + g n)`.
pub fn posterior_shrinkage_mean(fit: &FitResult, cfg: &ZellnerConfig) -> DVector<f64> {
    &fit.theta_hat * cfg.shrinkage(fit.n)
}

/// Model-averaged posterior mean of the full length-`p` coefficient vector.
pub fn bma_point_estimate(
    weights: &BTreeMap<ModelIndicator, f64>,
    dataset: &Dataset,
    cfg: &ZellnerConfig,
) -> Result<DVector<f64>> {
    let total: f64 = weights.values().sum();
    if weights.values().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-8 {
        return Err(Error::WeightsNotNormalized(total));
    }
    let mut out = DVector::zeros(dataset.p());
    for (gamma, &w) in weights {
        if w == 0.0 || gamma.is_empty() {
            continue;
        }
        let fit = least_squares_fit(dataset, gamma)?;
        let mean = posterior_shrinkage_mean(&fit, cfg);
        for (k, j) in gamma.indices().into_iter().enumerate() {
            out[j] += w * mean[k];
        }
    }
    Ok(out)
}
