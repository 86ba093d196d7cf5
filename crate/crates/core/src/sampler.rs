//! Posterior computation over the model space for a fixed model prior.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linmodel::{ModelIndicator, ModelLikelihood};
use crate::math::{log_sigmoid, log_sum_exp, sigmoid};
use crate::priors::{CoordinateOdds, ModelPrior};
use crate::rng::stream_rng;

pub const DEFAULT_MAX_ENUMERATE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    /// Full passes over all `p` coordinates.
    pub n_sweeps: usize,
    /// Leading sweeps discarded from the summaries.
    pub burn_in: usize,
    pub seed: u64,
    /// Stream id within `seed`; distinct chains must use distinct streams.
    pub stream: u64,
    /// Starting model; empty model when `None`.
    pub init: Option<ModelIndicator>,
}

impl GibbsConfig {
    /// `n_sweeps` sweeps with the first 10% discarded.
    pub fn new(n_sweeps: usize, seed: u64) -> Self {
        GibbsConfig {
            n_sweeps,
            burn_in: n_sweeps / 10,
            seed,
            stream: 0,
            init: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_init(mut self, init: ModelIndicator) -> Self {
        self.init = Some(init);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sweeps == 0 {
            return Err(Error::InvalidConfig("n_sweeps must be at least 1".into()));
        }
        if self.burn_in >= self.n_sweeps {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be smaller than n_sweeps ({})",
                self.burn_in, self.n_sweeps
            )));
        }
        Ok(())
    }
}

/// Summary of a Gibbs run over models.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    /// Post-burn-in inclusion frequencies.
    pub pip: DVector<f64>,
    /// Post-burn-in visit frequencies.
    pub model_freq: BTreeMap<ModelIndicator, f64>,
    pub n_kept: usize,
    /// Unnormalized log posterior `log p(y|γ) + log π(γ)` after every sweep.
    pub log_post_trace: Vec<f64>,
    pub final_state: ModelIndicator,
}

/// Exact posterior over all `2^p` models; entry `mask` of `probs` is the model
/// whose covariate `j` is included iff bit `j` of `mask` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub p: usize,
    /// `log Σ_γ p(y|γ) π(γ)`.
    pub log_evidence: f64,
    pub probs: Vec<f64>,
    pub pip: DVector<f64>,
}

impl ExactPosterior {
    pub fn prob(&self, gamma: &ModelIndicator) -> f64 {
        let mask = gamma.indices().iter().fold(0usize, |m, &j| m | (1 << j));
        self.probs[mask]
    }

    pub fn models(&self) -> impl Iterator<Item = (ModelIndicator, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(m, &pr)| (ModelIndicator::from_mask(self.p, m as u64), pr))
    }

    /// Models with probability above `floor`, renormalized to sum to one.
    pub fn weights(&self, floor: f64) -> BTreeMap<ModelIndicator, f64> {
        let kept: Vec<_> = self.models().filter(|(_, pr)| *pr > floor).collect();
        let total: f64 = kept.iter().map(|(_, pr)| pr).sum();
        kept.into_iter().map(|(g, pr)| (g, pr / total)).collect()
    }

    pub fn mode(&self) -> ModelIndicator {
        let (mask, _) = self
            .probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (m, &pr)| if pr > best.1 { (m, pr) } else { best });
        ModelIndicator::from_mask(self.p, mask as u64)
    }
}

/// Log marginal likelihoods of every model, computed once and reusable across
/// model priors (the marginal likelihood does not depend on the prior).
#[derive(Debug, Clone)]
pub struct ModelSpace {
    p: usize,
    log_marginals: Vec<f64>,
}

impl ModelSpace {
    pub fn build<L: ModelLikelihood + ?Sized>(lik: &L, max_p: usize) -> Result<Self> {
        let p = lik.p();
        if p > max_p || p >= 64 {
            return Err(Error::TooLarge { p, max: max_p.min(63) });
        }
        let log_marginals = (0..1u64 << p)
            .into_par_iter()
            .map(|mask| lik.log_marginal_uncached(&ModelIndicator::from_mask(p, mask)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSpace { p, log_marginals })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn log_marginals(&self) -> &[f64] {
        &self.log_marginals
    }

    /// Log prior mass of every model, indexed like [`ModelSpace::log_marginals`].
    fn log_priors(&self, prior: &ModelPrior) -> Result<Vec<f64>> {
        let p = self.p;
        let odds = prior.coordinate_odds(p)?;
        let masks = 0..self.log_marginals.len();
        Ok(match odds {
            CoordinateOdds::Independent(eta) => {
                let base: f64 = eta.iter().map(|&e| log_sigmoid(-e)).sum();
                let gain: Vec<f64> = eta.iter().map(|&e| log_sigmoid(e) - log_sigmoid(-e)).collect();
                masks
                    .map(|m| {
                        let mut lp = base;
                        let mut bits = m;
                        while bits != 0 {
                            lp += gain[bits.trailing_zeros() as usize];
                            bits &= bits - 1;
                        }
                        lp
                    })
                    .collect()
            }
            CoordinateOdds::SizeBased { .. } => {
                let by_size: Vec<f64> = (0..=p)
                    .map(|k| {
                        let mut g = ModelIndicator::empty(p);
                        for j in 0..k {
                            g.insert(j);
                        }
                        prior.log_model_prior(&g)
                    })
                    .collect::<Result<_>>()?;
                masks.map(|m| by_size[m.count_ones() as usize]).collect()
            }
        })
    }

    pub fn posterior(&self, prior: &ModelPrior) -> Result<ExactPosterior> {
        let log_joint: Vec<f64> = self
            .log_priors(prior)?
            .iter()
            .zip(&self.log_marginals)
            .map(|(lp, lm)| lp + lm)
            .collect();
        let log_evidence = log_sum_exp(&log_joint);
        if !log_evidence.is_finite() {
            return Err(Error::InvalidConfig("every model has zero posterior mass".into()));
        }
        let probs: Vec<f64> = log_joint.iter().map(|v| (v - log_evidence).exp()).collect();
        let mut pip = DVector::zeros(self.p);
        for (m, &pr) in probs.iter().enumerate() {
            let mut bits = m;
            while bits != 0 {
                pip[bits.trailing_zeros() as usize] += pr;
                bits &= bits - 1;
            }
        }
        Ok(ExactPosterior {
            p: self.p,
            log_evidence,
            probs,
            pip,
        })
    }
}

/// Exact posterior by enumerating all `2^p` models.
pub fn enumerate_posterior<L: ModelLikelihood + ?Sized>(
    lik: &L,
    prior: &ModelPrior,
    max_p: usize,
) -> Result<ExactPosterior> {
    ModelSpace::build(lik, max_p)?.posterior(prior)
}

#[inline]
fn inclusion_probability(lm_with: f64, lm_without: f64, log_prior_odds: f64) -> f64 {
    if lm_with == f64::NEG_INFINITY {
        0.0
    } else if lm_without == f64::NEG_INFINITY {
        1.0
    } else {
        sigmoid(lm_with - lm_without + log_prior_odds)
    }
}

/// `P(γ_j = 1 | γ_{-j}, y)` under the given prior.
pub fn conditional_inclusion_prob<L: ModelLikelihood + ?Sized>(
    state: &ModelIndicator,
    j: usize,
    lik: &L,
    prior: &ModelPrior,
) -> Result<f64> {
    let odds = prior.coordinate_odds(lik.p())?;
    let with = state.with(j);
    let without = state.without(j);
    Ok(inclusion_probability(
        lik.log_marginal(&with)?,
        lik.log_marginal(&without)?,
        odds.log_odds(j, without.size()),
    ))
}

pub(crate) struct SweepState {
    pub(crate) gamma: ModelIndicator,
    size: usize,
    log_marginal: f64,
}

pub(crate) fn sweep<L: ModelLikelihood + ?Sized, R: Rng + ?Sized>(
    state: &mut SweepState,
    lik: &L,
    odds: &CoordinateOdds,
    rng: &mut R,
) -> Result<()> {
    for j in 0..state.gamma.p() {
        let included = state.gamma.contains(j);
        let others = state.size - usize::from(included);
        let flipped = if included {
            state.gamma.without(j)
        } else {
            state.gamma.with(j)
        };
        let lm_flipped = lik.log_marginal(&flipped)?;
        let (lm_with, lm_without) = if included {
            (state.log_marginal, lm_flipped)
        } else {
            (lm_flipped, state.log_marginal)
        };
        let prob = inclusion_probability(lm_with, lm_without, odds.log_odds(j, others));
        let take = rng.random::<f64>() < prob;
        if take != included {
            state.gamma = flipped;
            state.log_marginal = lm_flipped;
            state.size = others + usize::from(take);
        }
    }
    Ok(())
}

/// One systematic-scan sweep over `j = 0..p`, each coordinate drawn from its
/// full conditional. Rank-deficient proposals are never accepted.
pub fn gibbs_sweep<L: ModelLikelihood + ?Sized, R: Rng + ?Sized>(
    state: &ModelIndicator,
    lik: &L,
    prior: &ModelPrior,
    rng: &mut R,
) -> Result<ModelIndicator> {
    let odds = prior.coordinate_odds(lik.p())?;
    let mut s = start_state(state.clone(), lik)?;
    sweep(&mut s, lik, &odds, rng)?;
    Ok(s.gamma)
}

pub(crate) fn start_state<L: ModelLikelihood + ?Sized>(gamma: ModelIndicator, lik: &L) -> Result<SweepState> {
    let log_marginal = lik.log_marginal(&gamma)?;
    if log_marginal == f64::NEG_INFINITY {
        return Err(Error::RankDeficient(gamma.to_string()));
    }
    Ok(SweepState {
        size: gamma.size(),
        gamma,
        log_marginal,
    })
}

/// Runs a Gibbs chain. Output is a deterministic function of the inputs.
pub fn run_chain<L: ModelLikelihood + ?Sized>(
    lik: &L,
    prior: &ModelPrior,
    cfg: &GibbsConfig,
) -> Result<ChainResult> {
    cfg.validate()?;
    let p = lik.p();
    let odds = prior.coordinate_odds(p)?;
    let mut rng = stream_rng(cfg.seed, cfg.stream);
    let init = cfg.init.clone().unwrap_or_else(|| ModelIndicator::empty(p));
    if init.p() != p {
        return Err(Error::DimensionMismatch("initial model has the wrong p".into()));
    }
    let mut state = start_state(init, lik)?;

    let mut counts: BTreeMap<ModelIndicator, usize> = BTreeMap::new();
    let mut incl = vec![0usize; p];
    let mut trace = Vec::with_capacity(cfg.n_sweeps);
    for it in 0..cfg.n_sweeps {
        sweep(&mut state, lik, &odds, &mut rng)?;
        trace.push(state.log_marginal + prior.log_model_prior(&state.gamma)?);
        if it >= cfg.burn_in {
            for j in state.gamma.indices() {
                incl[j] += 1;
            }
            *counts.entry(state.gamma.clone()).or_default() += 1;
        }
    }
    let n_kept = cfg.n_sweeps - cfg.burn_in;
    let kept = n_kept as f64;
    Ok(ChainResult {
        pip: DVector::from_iterator(p, incl.iter().map(|&c| c as f64 / kept)),
        model_freq: counts
            .into_iter()
            .map(|(g, c)| (g, c as f64 / kept))
            .collect(),
        n_kept,
        log_post_trace: trace,
        final_state: state.gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{Dataset, MarginalEvaluator, ZellnerConfig};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Likelihood that is identical for every model.
    struct Flat(usize);

    impl ModelLikelihood for Flat {
        fn p(&self) -> usize {
            self.0
        }
        fn log_marginal(&self, _: &ModelIndicator) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] + 0.5 * x[(i, 1)] + rng.random::<f64>() - 0.5);
        Dataset::new(y, x).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(GibbsConfig::new(0, 1).validate().is_err());
        assert!(GibbsConfig::new(10, 1).with_burn_in(10).validate().is_err());
        assert_eq!(GibbsConfig::new(100, 1).burn_in, 10);
    }

    #[test]
    fn symmetric_case_flips_with_probability_half() {
        let prior = ModelPrior::fixed(vec![0.5; 3]).unwrap();
        let s = ModelIndicator::from_indices(3, &[2]).unwrap();
        assert_eq!(conditional_inclusion_prob(&s, 0, &Flat(3), &prior).unwrap(), 0.5);
    }

    #[test]
    fn vanishing_prior_probability_excludes() {
        let d = dataset(30, 3, 4);
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
        let prior = ModelPrior::fixed(vec![1e-300, 0.5, 0.5]).unwrap();
        let pr = conditional_inclusion_prob(&ModelIndicator::empty(3), 0, &ev, &prior).unwrap();
        assert!(pr < 1e-250);
    }

    #[test]
    fn single_covariate_posterior_odds() {
        let d = Dataset::from_rows(
            (0..15).map(|i| 0.2 * i as f64 + (i % 3) as f64).collect(),
            &(0..15).map(|i| vec![(i as f64 - 7.0) / 4.0]).collect::<Vec<_>>(),
        )
        .unwrap();
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
        let prior = ModelPrior::fixed(vec![0.3]).unwrap();
        let post = enumerate_posterior(&ev, &prior, 20).unwrap();
        let lm0 = ev.log_marginal(&ModelIndicator::empty(1)).unwrap();
        let lm1 = ev.log_marginal(&ModelIndicator::full(1)).unwrap();
        let odds = (lm1 - lm0).exp() * 0.3 / 0.7;
        assert!((post.probs[1] / post.probs[0] - odds).abs() < 1e-10 * odds);
        assert!((post.probs[0] + post.probs[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn duplicate_columns_are_exchangeable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = DMatrix::from_fn(25, 4, |_, _| rng.random::<f64>() - 0.5);
        let c = x.column(1).clone_owned();
        x.set_column(3, &c);
        let y = DVector::from_fn(25, |i, _| x[(i, 1)] + 0.3 * (rng.random::<f64>() - 0.5));
        let d = Dataset::new(y, x).unwrap();
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
        let post = enumerate_posterior(&ev, &ModelPrior::fixed(vec![0.5; 4]).unwrap(), 20).unwrap();
        assert!((post.pip[1] - post.pip[3]).abs() < 1e-10);
        assert_eq!(post.prob(&ModelIndicator::from_indices(4, &[1, 3]).unwrap()), 0.0);
    }

    #[test]
    fn enumeration_is_normalized_and_consistent() {
        let d = dataset(40, 10, 5);
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
        let post = enumerate_posterior(&ev, &ModelPrior::beta_binomial(1.0, 1.0).unwrap(), 20).unwrap();
        assert!((post.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(post.log_evidence.is_finite());
        for j in 0..10 {
            let direct: f64 = post.models().filter(|(g, _)| g.contains(j)).map(|(_, p)| p).sum();
            assert!((direct - post.pip[j]).abs() < 1e-12);
        }
        assert!(enumerate_posterior(&ev, &ModelPrior::fixed(vec![0.5; 10]).unwrap(), 9).is_err());
    }

    #[test]
    fn chain_is_reproducible() {
        let d = Dataset::new(DVector::zeros(10), DMatrix::from_fn(10, 4, |i, j| ((i + 2 * j) % 5) as f64)).unwrap();
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
        let prior = ModelPrior::fixed(vec![0.5; 4]).unwrap();
        let cfg = GibbsConfig::new(1, 42).with_burn_in(0);
        let a = run_chain(&ev, &prior, &cfg).unwrap();
        let b = run_chain(&ev, &prior, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.pip.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn chain_summaries_are_consistent() {
        let d = dataset(40, 6, 9);
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap().with_cache(1 << 10);
        let res = run_chain(&ev, &ModelPrior::beta_binomial(1.0, 1.0).unwrap(), &GibbsConfig::new(500, 3)).unwrap();
        assert_eq!(res.n_kept, 450);
        assert_eq!(res.log_post_trace.len(), 500);
        assert!((res.model_freq.values().sum::<f64>() - 1.0).abs() < 1e-9);
        for j in 0..6 {
            let s: f64 = res.model_freq.iter().filter(|(g, _)| g.contains(j)).map(|(_, f)| f).sum();
            assert!((s - res.pip[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn flip_frequencies_match_conditionals() {
        let d = dataset(20, 3, 6);
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::known(1.0, 0.3)).unwrap();
        let prior = ModelPrior::fixed(vec![0.2, 0.4, 0.6]).unwrap();
        // Coordinate 0 is visited first, so after one sweep from a frozen
        // state it is distributed exactly as its full conditional.
        let state = ModelIndicator::from_indices(3, &[1, 2]).unwrap();
        let want = conditional_inclusion_prob(&state, 0, &ev, &prior).unwrap();
        let mut rng = stream_rng(5, 0);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| gibbs_sweep(&state, &ev, &prior, &mut rng).unwrap().contains(0))
            .count();
        let freq = hits as f64 / draws as f64;
        let se = (want * (1.0 - want) / draws as f64).sqrt();
        assert!((freq - want).abs() < 3.0 * se.max(1e-4), "{freq} vs {want}");
    }
}
