//! Model-space priors and the hyperprior on the meta-covariate coefficients.
//!
//! Under the logistic meta prior covariate `j` enters independently with
//! probability `m_j(ω) = 1 / (1 + exp(-z_jᵀω))`, and `ω ~ N(0, g V)` with
//! `V = (ZᵀZ / p)⁻¹` by default.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::linmodel::ModelIndicator;
use crate::math::{log_sigmoid, sigmoid, spd_inverse, ETA_CLAMP};

/// Per-covariate meta-covariates, one row `z_j` per regression covariate.
#[derive(Debug)]
pub struct MetaCovariates {
    z: DMatrix<f64>,
    intercept: Option<usize>,
    // (ZᵀZ/p)⁻¹, computed on first use and never refreshed.
    default_v: OnceLock<Option<DMatrix<f64>>>,
}

impl Clone for MetaCovariates {
    fn clone(&self) -> Self {
        MetaCovariates {
            z: self.z.clone(),
            intercept: self.intercept,
            default_v: self.default_v.clone(),
        }
    }
}

impl PartialEq for MetaCovariates {
    fn eq(&self, other: &Self) -> bool {
        self.z == other.z && self.intercept == other.intercept
    }
}

impl MetaCovariates {
    /// Wraps `z` as given. With `has_intercept`, some column must be all ones.
    pub fn new(z: DMatrix<f64>, has_intercept: bool) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty meta-covariate matrix".into()));
        }
        let intercept = if has_intercept {
            let col = (0..z.ncols())
                .find(|&c| z.column(c).iter().all(|&v| v == 1.0))
                .ok_or_else(|| {
                    Error::DimensionMismatch("no all-ones intercept column in Z".into())
                })?;
            Some(col)
        } else {
            None
        };
        Ok(MetaCovariates {
            z,
            intercept,
            default_v: OnceLock::new(),
        })
    }

    /// Prepends an intercept column to `raw` (which must not contain one).
    pub fn with_intercept(raw: &DMatrix<f64>) -> Self {
        let p = raw.nrows();
        let z = DMatrix::from_fn(p, raw.ncols() + 1, |i, c| {
            if c == 0 {
                1.0
            } else {
                raw[(i, c - 1)]
            }
        });
        MetaCovariates {
            z,
            intercept: Some(0),
            default_v: OnceLock::new(),
        }
    }

    pub fn intercept_only(p: usize) -> Self {
        Self::with_intercept(&DMatrix::zeros(p, 0))
    }

    /// Block-indicator columns, one per block, no separate intercept.
    pub fn from_blocks(blocks: &BlockStructure) -> Self {
        let z = DMatrix::from_fn(blocks.p(), blocks.n_blocks(), |j, b| {
            if blocks.label(j) == b {
                1.0
            } else {
                0.0
            }
        });
        MetaCovariates {
            z,
            intercept: None,
            default_v: OnceLock::new(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn p(&self) -> usize {
        self.z.nrows()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn intercept_column(&self) -> Option<usize> {
        self.intercept
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept.is_some()
    }

    /// Copy with rows reordered so that new row `k` is old row `perm[k]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let z = DMatrix::from_fn(self.p(), self.q(), |k, c| self.z[(perm[k], c)]);
        MetaCovariates {
            z,
            intercept: self.intercept,
            default_v: OnceLock::new(),
        }
    }

    fn check_omega(&self, omega: &DVector<f64>) -> Result<()> {
        if omega.len() != self.q() {
            return Err(Error::DimensionMismatch(format!(
                "omega has length {}, Z has {} columns",
                omega.len(),
                self.q()
            )));
        }
        Ok(())
    }

    /// `z_jᵀω` clamped to `±ETA_CLAMP`.
    pub fn linear_predictor(&self, omega: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_omega(omega)?;
        Ok((&self.z * omega).map(|v| v.clamp(-ETA_CLAMP, ETA_CLAMP)))
    }

    /// Prior inclusion probabilities `m(ω)`.
    pub fn inclusion_probs(&self, omega: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.linear_predictor(omega)?.map(sigmoid))
    }

    /// `ZᵀZ / p`, the default hyperprior precision (up to `g`).
    pub fn scaled_gram(&self) -> DMatrix<f64> {
        self.z.transpose() * &self.z / self.p() as f64
    }

    /// `V = (ZᵀZ/p)⁻¹`, or `RankDeficientZ`.
    pub fn default_v(&self) -> Result<&DMatrix<f64>> {
        self.default_v
            .get_or_init(|| spd_inverse(&self.scaled_gram()))
            .as_ref()
            .ok_or(Error::RankDeficientZ)
    }

    /// `v_j = z_jᵀ V z_j` for the default `V`.
    pub fn leverages(&self) -> Result<Vec<f64>> {
        let v = self.default_v()?;
        Ok((0..self.p())
            .map(|j| {
                let zj = self.z.row(j).transpose();
                zj.dot(&(v * &zj))
            })
            .collect())
    }
}

/// Partition of covariates into `B` blocks (0-based labels).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStructure {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl BlockStructure {
    /// Every block in `0..=max(label)` must be non-empty.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::DimensionMismatch("no covariates in block structure".into()));
        }
        let b = labels.iter().copied().max().unwrap() + 1;
        let mut sizes = vec![0; b];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidConfig(format!("block {empty} has no covariates")));
        }
        Ok(BlockStructure { labels, sizes })
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect();
        Self::new(labels)
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn label(&self, j: usize) -> usize {
        self.labels[j]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Mean of `values` within each block.
    pub fn block_means(&self, values: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_blocks()];
        for (j, v) in values.iter().enumerate() {
            sums[self.labels[j]] += v;
        }
        sums.iter()
            .zip(&self.sizes)
            .map(|(s, &n)| s / n as f64)
            .collect()
    }

    /// Expands per-block values to per-covariate values.
    pub fn expand(&self, per_block: &[f64]) -> Vec<f64> {
        self.labels.iter().map(|&b| per_block[b]).collect()
    }
}

/// Prior over the model space.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelPrior {
    LogisticMeta {
        meta: Arc<MetaCovariates>,
        omega: DVector<f64>,
    },
    BetaBinomial {
        alpha: f64,
        beta: f64,
    },
    FixedBernoulli {
        probs: Vec<f64>,
    },
}

/// Conditional log prior odds of including covariate `j` given the rest.
#[derive(Debug, Clone)]
pub(crate) enum CoordinateOdds {
    Independent(Vec<f64>),
    SizeBased { alpha: f64, beta: f64, p: usize },
}

impl CoordinateOdds {
    /// `others` is the number of covariates other than `j` currently included.
    #[inline]
    pub(crate) fn log_odds(&self, j: usize, others: usize) -> f64 {
        match self {
            CoordinateOdds::Independent(v) => v[j],
            CoordinateOdds::SizeBased { alpha, beta, p } => {
                // B(α+k+1, β+p−k−1) / B(α+k, β+p−k) = (α+k) / (β+p−k−1)
                let k = others as f64;
                ((alpha + k) / (beta + *p as f64 - k - 1.0)).ln()
            }
        }
    }
}

impl ModelPrior {
    pub fn logistic(meta: Arc<MetaCovariates>, omega: DVector<f64>) -> Result<Self> {
        meta.check_omega(&omega)?;
        Ok(ModelPrior::LogisticMeta { meta, omega })
    }

    pub fn beta_binomial(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidHyper(format!(
                "beta-binomial parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(ModelPrior::BetaBinomial { alpha, beta })
    }

    pub fn fixed(probs: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = probs.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::DomainError(bad));
        }
        Ok(ModelPrior::FixedBernoulli { probs })
    }

    /// Number of covariates the prior is defined over, if fixed by the prior.
    pub fn p(&self) -> Option<usize> {
        match self {
            ModelPrior::LogisticMeta { meta, .. } => Some(meta.p()),
            ModelPrior::FixedBernoulli { probs } => Some(probs.len()),
            ModelPrior::BetaBinomial { .. } => None,
        }
    }

    fn check_p(&self, p: usize) -> Result<()> {
        match self.p() {
            Some(q) if q != p => Err(Error::DimensionMismatch(format!(
                "prior defined over {q} covariates, model over {p}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn prior_inclusion_probs(&self) -> Result<DVector<f64>> {
        match self {
            ModelPrior::LogisticMeta { meta, omega } => meta.inclusion_probs(omega),
            ModelPrior::FixedBernoulli { probs } => Ok(DVector::from_column_slice(probs)),
            ModelPrior::BetaBinomial { .. } => Err(Error::NotFactorizable),
        }
    }

    pub fn log_model_prior(&self, gamma: &ModelIndicator) -> Result<f64> {
        let p = gamma.p();
        self.check_p(p)?;
        match self {
            ModelPrior::LogisticMeta { meta, omega } => {
                let eta = meta.linear_predictor(omega)?;
                Ok((0..p)
                    .map(|j| {
                        if gamma.contains(j) {
                            log_sigmoid(eta[j])
                        } else {
                            log_sigmoid(-eta[j])
                        }
                    })
                    .sum())
            }
            ModelPrior::FixedBernoulli { probs } => Ok((0..p)
                .map(|j| {
                    if gamma.contains(j) {
                        probs[j].ln()
                    } else {
                        (-probs[j]).ln_1p()
                    }
                })
                .sum()),
            ModelPrior::BetaBinomial { alpha, beta } => {
                let k = gamma.size() as f64;
                Ok(ln_beta(alpha + k, beta + p as f64 - k) - ln_beta(*alpha, *beta))
            }
        }
    }

    pub(crate) fn coordinate_odds(&self, p: usize) -> Result<CoordinateOdds> {
        self.check_p(p)?;
        Ok(match self {
            ModelPrior::LogisticMeta { meta, omega } => {
                CoordinateOdds::Independent(meta.linear_predictor(omega)?.iter().copied().collect())
            }
            ModelPrior::FixedBernoulli { probs } => {
                CoordinateOdds::Independent(probs.iter().map(|&q| crate::math::logit(q)).collect())
            }
            ModelPrior::BetaBinomial { alpha, beta } => CoordinateOdds::SizeBased {
                alpha: *alpha,
                beta: *beta,
                p,
            },
        })
    }
}

/// Gaussian hyperprior `ω ~ N(0, g_omega V)`.
///
/// `g_omega = +inf` gives a flat prior (zero log density and gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPrior {
    g_omega: f64,
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
}

impl HyperPrior {
    pub fn new(g_omega: f64, v: DMatrix<f64>) -> Result<Self> {
        if !(g_omega > 0.0) {
            return Err(Error::InvalidHyper(format!("g_omega must be positive, got {g_omega}")));
        }
        if !v.is_square() {
            return Err(Error::DimensionMismatch("V must be square".into()));
        }
        let scale = v.amax().max(1.0);
        if (&v - v.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidHyper("V is not symmetric".into()));
        }
        let v_inv = spd_inverse(&v)
            .ok_or_else(|| Error::InvalidHyper("V is not positive definite".into()))?;
        Ok(HyperPrior { g_omega, v, v_inv })
    }

    /// `V = (ZᵀZ/p)⁻¹`.
    pub fn default_for(meta: &MetaCovariates, g_omega: f64) -> Result<Self> {
        if !(g_omega > 0.0) {
            return Err(Error::InvalidHyper(format!("g_omega must be positive, got {g_omega}")));
        }
        let v = meta.default_v()?.clone();
        Ok(HyperPrior {
            g_omega,
            v,
            v_inv: meta.scaled_gram(),
        })
    }

    /// Default `V` with `g_omega` from [`calibrate_g_omega`] at its defaults.
    pub fn calibrated(meta: &MetaCovariates) -> Result<Self> {
        let g = calibrate_g_omega(meta, 0.001, 0.999, 0.95)?;
        Self::default_for(meta, g)
    }

    pub fn g_omega(&self) -> f64 {
        self.g_omega
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn v_inv(&self) -> &DMatrix<f64> {
        &self.v_inv
    }

    pub fn q(&self) -> usize {
        self.v.nrows()
    }

    /// `V⁻¹ / g_omega`; zero for a flat prior.
    pub fn precision(&self) -> DMatrix<f64> {
        if self.g_omega.is_infinite() {
            DMatrix::zeros(self.q(), self.q())
        } else {
            &self.v_inv / self.g_omega
        }
    }

    /// True when `V⁻¹` equals `ZᵀZ/p` for this `Z` (to rounding).
    pub fn is_default_for(&self, meta: &MetaCovariates) -> bool {
        let g = meta.scaled_gram();
        g.shape() == self.v_inv.shape()
            && (&g - &self.v_inv).amax() <= 1e-12 * g.amax().max(1.0)
    }
}

/// Log density of the hyperprior with its normalizing constant dropped,
/// `-ωᵀV⁻¹ω / (2 g_omega)`, and its gradient `-V⁻¹ω / g_omega`.
pub fn log_hyperprior_and_grad(omega: &DVector<f64>, hp: &HyperPrior) -> Result<(f64, DVector<f64>)> {
    if omega.len() != hp.q() {
        return Err(Error::DimensionMismatch(format!(
            "omega has length {}, hyperprior has dimension {}",
            omega.len(),
            hp.q()
        )));
    }
    let grad = -(hp.precision() * omega);
    Ok((0.5 * omega.dot(&grad), grad))
}

/// `½ log(1 + g n) + log(1/ω_b − 1)`: the log-penalty per included covariate
/// in a block whose prior inclusion probability is `omega_b`.
pub fn kappa(omega_b: f64, g_theta: f64, n: usize) -> Result<f64> {
    if !(omega_b > 0.0 && omega_b < 1.0) {
        return Err(Error::DomainError(omega_b));
    }
    Ok(0.5 * (g_theta * n as f64).ln_1p() + (1.0 / omega_b - 1.0).ln())
}

/// Largest `g_omega` such that every `m_j(ω)` stays inside `[lo, hi]` with
/// prior probability at least `coverage`, using the worst-case leverage
/// `max_j z_jᵀVz_j`. Asymmetric bounds use the tighter log-odds magnitude.
pub fn calibrate_g_omega(meta: &MetaCovariates, lo: f64, hi: f64, coverage: f64) -> Result<f64> {
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::InvalidHyper(format!("need 0 < lo < hi < 1, got {lo}, {hi}")));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::DomainError(coverage));
    }
    let v_max = meta.leverages()?.into_iter().fold(0.0, f64::max);
    let bound = crate::math::logit(lo).abs().min(crate::math::logit(hi).abs());
    let quantile = Normal::standard().inverse_cdf((1.0 - coverage) / 2.0);
    Ok((bound / quantile).powi(2) / v_max)
}
