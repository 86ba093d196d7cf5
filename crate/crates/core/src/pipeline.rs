//! End-to-end fitting: estimate the model prior's hyperparameters, then
//! summarize the posterior by PIPs and BMA coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

use crate::ebayes::{block_gibbs_full, em_fit, sparse_start, two_step, EStep, EmConfig, MStep};
use crate::error::{Error, Result};
use crate::linmodel::{
    Dataset, MarginalEvaluator, ModelIndicator, ModelLikelihood, Standardization, ZellnerConfig,
};
use crate::priors::{BlockStructure, HyperPrior, MetaCovariates, ModelPrior};
use crate::rng::substream;
use crate::sampler::{run_chain, GibbsConfig, ModelSpace, DEFAULT_MAX_ENUMERATE};

/// Posterior weights below this are dropped when averaging coefficients over
/// an enumerated model space.
const BMA_WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FitMethod {
    /// EM with exact E-step by enumeration.
    EmExact,
    /// Stochastic EM with Gibbs E-step.
    EmGibbs,
    /// Block-mean two-step estimator; blocks are the distinct rows of `Z`.
    TwoStep,
    /// Joint sampler over models and `ω`.
    Mcmc,
    /// Beta-Binomial(1, 1) model prior, no meta-covariates.
    BetaBinomial,
}

impl FitMethod {
    pub const ALL: [FitMethod; 5] = [
        FitMethod::EmExact,
        FitMethod::EmGibbs,
        FitMethod::TwoStep,
        FitMethod::Mcmc,
        FitMethod::BetaBinomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitMethod::EmExact => "em-exact",
            FitMethod::EmGibbs => "em-gibbs",
            FitMethod::TwoStep => "two-step",
            FitMethod::Mcmc => "mcmc",
            FitMethod::BetaBinomial => "beta-binomial",
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Knobs shared by all fitting methods.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub zellner: ZellnerConfig,
    /// Sweeps per Gibbs run (each stochastic E-step, and the final run).
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub stream: u64,
    /// Hyperprior scale; calibrated from `Z` when `None`.
    pub g_omega: Option<f64>,
    /// Start EM at prior inclusion probability `1/(p+1)` instead of `1/2`.
    pub sparse_start: bool,
    pub em_max_iters: usize,
    pub em_tol: f64,
    /// Largest `p` handled by enumeration; Gibbs is used above it.
    pub max_enumerate: usize,
    pub mh_step: f64,
    pub beta_binomial: (f64, f64),
    /// Memo-table size for marginal likelihoods.
    pub cache_capacity: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            zellner: ZellnerConfig::default(),
            sweeps: 5000,
            burn_in: 500,
            seed: 0,
            stream: 0,
            g_omega: None,
            sparse_start: true,
            em_max_iters: 30,
            em_tol: 1e-2,
            max_enumerate: DEFAULT_MAX_ENUMERATE,
            mh_step: 0.5,
            beta_binomial: (1.0, 1.0),
            cache_capacity: 1 << 18,
        }
    }
}

impl FitSettings {
    fn gibbs(&self, stream: u64) -> Result<GibbsConfig> {
        let cfg = GibbsConfig::new(self.sweeps, self.seed)
            .with_burn_in(self.burn_in)
            .with_stream(stream);
        cfg.validate()?;
        Ok(cfg)
    }

    fn hyperprior(&self, meta: &MetaCovariates) -> Result<HyperPrior> {
        match self.g_omega {
            Some(g) => HyperPrior::default_for(meta, g),
            None => HyperPrior::calibrated(meta),
        }
    }
}

/// Result of [`fit_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub method: FitMethod,
    pub pip: DVector<f64>,
    /// Model-averaged posterior mean of `θ`, on the scale of the fitted data.
    pub bma: DVector<f64>,
    /// Estimated `ω` (per block for the two-step method).
    pub omega: Option<DVector<f64>>,
    pub g_omega: Option<f64>,
    /// Whether the hyperparameter iteration met its tolerance.
    pub converged: Option<bool>,
}

/// Fits `method` to `dataset`. `meta` must already contain any intercept
/// column; it is ignored by the Beta-Binomial method.
pub fn fit_model(
    dataset: &Dataset,
    meta: &Arc<MetaCovariates>,
    method: FitMethod,
    settings: &FitSettings,
) -> Result<FitOutcome> {
    if method != FitMethod::BetaBinomial && meta.p() != dataset.p() {
        return Err(Error::DimensionMismatch(format!(
            "meta-covariates describe {} covariates, data has {}",
            meta.p(),
            dataset.p()
        )));
    }
    let ev = MarginalEvaluator::new(dataset, settings.zellner)?.with_cache(settings.cache_capacity);
    let p = dataset.p();
    let exact = p <= settings.max_enumerate;
    let final_stream = substream(settings.stream, 1);

    let summarize = |prior: &ModelPrior, use_exact: bool| -> Result<(DVector<f64>, DVector<f64>)> {
        if use_exact {
            let post = ModelSpace::build(&ev, settings.max_enumerate)?.posterior(prior)?;
            let bma = average_coefficients(&ev, &post.weights(BMA_WEIGHT_FLOOR))?;
            Ok((post.pip, bma))
        } else {
            let chain = run_chain(&ev, prior, &settings.gibbs(final_stream)?)?;
            let bma = average_coefficients(&ev, &chain.model_freq)?;
            Ok((chain.pip, bma))
        }
    };

    match method {
        FitMethod::EmExact | FitMethod::EmGibbs => {
            if method == FitMethod::EmExact && !exact {
                return Err(Error::TooLarge {
                    p,
                    max: settings.max_enumerate,
                });
            }
            let hp = settings.hyperprior(meta)?;
            let e_step = match method {
                FitMethod::EmExact => EStep::Exact {
                    max_p: settings.max_enumerate,
                },
                _ => EStep::Stochastic(settings.gibbs(substream(settings.stream, 0))?),
            };
            // Exact EM is deterministic, so it can be run to a tight tolerance.
            let (max_iters, tol_omega) = match method {
                FitMethod::EmExact => (settings.em_max_iters.max(500), 1e-8),
                _ => (settings.em_max_iters, settings.em_tol),
            };
            let cfg = EmConfig {
                max_iters,
                tol_omega,
                e_step,
                m_step: MStep::Auto,
                omega_init: em_start(meta, settings)?,
                ..EmConfig::default()
            };
            let trace = em_fit(&ev, meta, &hp, &cfg)?;
            let omega = trace.omega_hat().clone();
            let prior = ModelPrior::logistic(meta.clone(), omega.clone())?;
            let (pip, bma) = summarize(&prior, method == FitMethod::EmExact)?;
            Ok(FitOutcome {
                method,
                pip,
                bma,
                omega: Some(omega),
                g_omega: Some(hp.g_omega()),
                converged: Some(trace.converged),
            })
        }
        FitMethod::TwoStep => {
            let blocks = blocks_from_rows(meta)?;
            let e_step = if exact {
                EStep::Exact {
                    max_p: settings.max_enumerate,
                }
            } else {
                EStep::Stochastic(settings.gibbs(substream(settings.stream, 0))?)
            };
            let out = two_step(&ev, &blocks, &e_step)?;
            // Blocks with every PIP at 0 or 1 would make the prior degenerate;
            // keep them strictly inside the unit interval.
            let per_block: Vec<f64> = out.omega1.iter().map(|w| w.clamp(1e-12, 1.0 - 1e-12)).collect();
            let prior = ModelPrior::fixed(blocks.expand(&per_block))?;
            let (pip, bma) = summarize(&prior, exact)?;
            Ok(FitOutcome {
                method,
                pip,
                bma,
                omega: Some(out.omega1),
                g_omega: None,
                converged: None,
            })
        }
        FitMethod::Mcmc => {
            let hp = settings.hyperprior(meta)?;
            let start = em_start(meta, settings)?;
            let out = block_gibbs_full(
                &ev,
                meta,
                &hp,
                &settings.gibbs(final_stream)?,
                settings.mh_step,
                start.as_ref(),
            )?;
            let mut freq: BTreeMap<ModelIndicator, f64> = BTreeMap::new();
            let w = 1.0 / out.gammas.len() as f64;
            for g in &out.gammas {
                *freq.entry(g.clone()).or_default() += w;
            }
            let bma = average_coefficients(&ev, &freq)?;
            Ok(FitOutcome {
                method,
                pip: out.pip,
                bma,
                omega: Some(out.omega_mean),
                g_omega: Some(hp.g_omega()),
                converged: None,
            })
        }
        FitMethod::BetaBinomial => {
            let (a, b) = settings.beta_binomial;
            let prior = ModelPrior::beta_binomial(a, b)?;
            let (pip, bma) = summarize(&prior, exact)?;
            Ok(FitOutcome {
                method,
                pip,
                bma,
                omega: None,
                g_omega: None,
                converged: None,
            })
        }
    }
}

fn em_start(meta: &MetaCovariates, settings: &FitSettings) -> Result<Option<DVector<f64>>> {
    if settings.sparse_start && meta.has_intercept() {
        Ok(Some(sparse_start(meta)?))
    } else {
        Ok(None)
    }
}

/// Groups covariates whose meta-covariate rows are identical.
pub fn blocks_from_rows(meta: &MetaCovariates) -> Result<BlockStructure> {
    let z = meta.matrix();
    let mut seen: Vec<Vec<u64>> = Vec::new();
    let mut labels = Vec::with_capacity(z.nrows());
    for r in 0..z.nrows() {
        let key: Vec<u64> = z.row(r).iter().map(|&v| (v + 0.0).to_bits()).collect();
        let label = match seen.iter().position(|k| *k == key) {
            Some(l) => l,
            None => {
                seen.push(key);
                seen.len() - 1
            }
        };
        labels.push(label);
    }
    BlockStructure::new(labels)
}

/// `Σ_γ w_γ E[θ | y, γ]` with each conditional mean embedded in `R^p`.
pub fn average_coefficients(
    ev: &MarginalEvaluator<'_>,
    weights: &BTreeMap<ModelIndicator, f64>,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(ev.p());
    for (gamma, &w) in weights {
        if gamma.is_empty() || w == 0.0 {
            continue;
        }
        out += ev.shrinkage_mean_embedded(gamma)? * w;
    }
    Ok(out)
}

/// A dataset centered and scaled for fitting, with the transform kept so
/// coefficients and predictions can be mapped back to the original units.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub scaling: Option<Standardization>,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl Prepared {
    /// With `standardize`, centers and scales `y` and every column of `X`
    /// (divisor `n − 1`). Without it the data are used as given.
    pub fn new(dataset: &Dataset, standardize: bool) -> Result<Self> {
        if !standardize {
            return Ok(Prepared {
                dataset: dataset.clone(),
                scaling: None,
                y_mean: 0.0,
                y_sd: 1.0,
            });
        }
        let n = dataset.n();
        let y_mean = dataset.y().mean();
        let ss: f64 = dataset.y().iter().map(|v| (v - y_mean).powi(2)).sum();
        let y_sd = (ss / (n as f64 - 1.0).max(1.0)).sqrt();
        if !(y_sd > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let scaled = dataset.with_response(dataset.y().map(|v| (v - y_mean) / y_sd))?;
        let (dataset, scaling) = scaled.standardize()?;
        Ok(Prepared {
            dataset,
            scaling: Some(scaling),
            y_mean,
            y_sd,
        })
    }

    /// Coefficients of the standardized `X` in the units of the original `y`.
    pub fn coef_in_y_units(&self, coef: &DVector<f64>) -> DVector<f64> {
        coef * self.y_sd
    }

    /// Prediction for a raw covariate row given coefficients on the fitted scale.
    pub fn predict(&self, row: &[f64], coef: &DVector<f64>) -> f64 {
        let x = match &self.scaling {
            Some(s) => s.apply_row(row),
            None => row.to_vec(),
        };
        self.y_mean + self.y_sd * x.iter().zip(coef.iter()).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn planted(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal));
        Dataset::new(y, x).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in FitMethod::ALL {
            assert_eq!(m.name().parse::<FitMethod>().unwrap(), m);
        }
        assert!("lasso".parse::<FitMethod>().is_err());
    }

    #[test]
    fn every_method_finds_a_planted_signal() {
        let d = planted(60, 5, 1);
        let meta = Arc::new(MetaCovariates::intercept_only(5));
        let settings = FitSettings {
            sweeps: 2000,
            burn_in: 200,
            ..FitSettings::default()
        };
        for m in FitMethod::ALL {
            let out = fit_model(&d, &meta, m, &settings).unwrap();
            assert!(out.pip[1] > 0.99, "{m}: {}", out.pip);
            assert!((out.bma[1] - 2.0).abs() < 0.5, "{m}: {}", out.bma);
        }
    }

    #[test]
    fn exact_em_rejects_large_p() {
        let d = planted(30, 6, 2);
        let meta = Arc::new(MetaCovariates::intercept_only(6));
        let settings = FitSettings {
            max_enumerate: 4,
            ..FitSettings::default()
        };
        let err = fit_model(&d, &meta, FitMethod::EmExact, &settings).unwrap_err();
        assert!(matches!(err, Error::TooLarge { p: 6, max: 4 }));
    }

    #[test]
    fn exact_bma_matches_explicit_average() {
        let d = planted(40, 4, 3);
        let meta = Arc::new(MetaCovariates::intercept_only(4));
        let out = fit_model(&d, &meta, FitMethod::BetaBinomial, &FitSettings::default()).unwrap();
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
        let post = ModelSpace::build(&ev, 10)
            .unwrap()
            .posterior(&ModelPrior::beta_binomial(1.0, 1.0).unwrap())
            .unwrap();
        let weights = post.weights(0.0);
        let explicit = crate::linmodel::bma_point_estimate(&weights, &d, &ZellnerConfig::default()).unwrap();
        assert!((out.bma - explicit).amax() < 1e-10);
    }

    #[test]
    fn blocks_follow_distinct_rows() {
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let meta = MetaCovariates::new(z, true).unwrap();
        let blocks = blocks_from_rows(&meta).unwrap();
        assert_eq!(blocks.labels(), &[0, 1, 0, 1]);
    }

    #[test]
    fn prepared_prediction_inverts_centering() {
        let d = planted(20, 3, 4);
        let prep = Prepared::new(&d, true).unwrap();
        assert!(prep.dataset.y().mean().abs() < 1e-12);
        assert!((prep.dataset.y().norm_squared() - 19.0).abs() < 1e-9);
        let row: Vec<f64> = d.x().row(0).iter().copied().collect();
        assert!((prep.predict(&row, &DVector::zeros(3)) - d.y().mean()).abs() < 1e-12);
    }
}
