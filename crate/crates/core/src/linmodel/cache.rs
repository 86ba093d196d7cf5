use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use lru::LruCache;
use nalgebra::{DMatrix, DVector};

use super::fit::{check_model, GramFactor};
use super::zellner::{log_marginal_from_fit, ZellnerConfig};
use super::{Dataset, ModelIndicator};
use crate::error::{Error, Result};

pub const DEFAULT_CACHE_CAPACITY: usize = 1 << 20;

/// Anything that can score a model by its log marginal likelihood.
///
/// Models outside the admissible set (rank deficient designs) score `-inf`.
pub trait ModelLikelihood: Sync {
    fn p(&self) -> usize;
    fn log_marginal(&self, gamma: &ModelIndicator) -> Result<f64>;

    /// Same value as [`ModelLikelihood::log_marginal`] but bypassing any memo
    /// table, for one-shot sweeps such as full enumeration.
    fn log_marginal_uncached(&self, gamma: &ModelIndicator) -> Result<f64> {
        self.log_marginal(gamma)
    }
}

/// Thread-safe LRU map from models to log marginal likelihoods.
///
/// Values are deterministic functions of the model, so concurrent inserts of
/// the same key are harmless.
pub struct LogMarginalCache {
    entries: Mutex<LruCache<ModelIndicator, f64>>,
    capacity: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl LogMarginalCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        LogMarginalCache {
            entries: Mutex::new(LruCache::new(cap)),
            capacity: cap.get(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, gamma: &ModelIndicator) -> Option<f64> {
        let found = self.entries.lock().unwrap().get(gamma).copied();
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    pub fn insert(&self, gamma: ModelIndicator, value: f64) {
        self.entries.lock().unwrap().put(gamma, value);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

impl Default for LogMarginalCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY)
    }
}

/// Zellner-prior marginal likelihoods over a fixed dataset.
///
/// Precomputes `XᵀX`, `Xᵀy` and `yᵀy` once; each model is then scored from a
/// Cholesky factor of its Gram submatrix. The value for a model is a pure
/// function of the model, so results are identical with or without the cache.
pub struct MarginalEvaluator<'a> {
    dataset: &'a Dataset,
    cfg: ZellnerConfig,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    cache: Option<LogMarginalCache>,
}

impl<'a> MarginalEvaluator<'a> {
    pub fn new(dataset: &'a Dataset, cfg: ZellnerConfig) -> Result<Self> {
        cfg.validate()?;
        let xt = dataset.x().transpose();
        Ok(MarginalEvaluator {
            dataset,
            cfg,
            gram: &xt * dataset.x(),
            xty: &xt * dataset.y(),
            yty: dataset.y().dot(dataset.y()),
            cache: None,
        })
    }

    pub fn with_cache(mut self, capacity: usize) -> Self {
        self.cache = Some(LogMarginalCache::new(capacity));
        self
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn config(&self) -> &ZellnerConfig {
        &self.cfg
    }

    pub fn cache(&self) -> Option<&LogMarginalCache> {
        self.cache.as_ref()
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// `yᵀ P_γ y`, or `RankDeficient` when `X_γ` fails the rank check.
    pub fn fitted_sumsq(&self, gamma: &ModelIndicator) -> Result<f64> {
        check_model(self.dataset, gamma)?;
        self.factor(gamma)
            .map(|f| f.fitted_sumsq())
            .ok_or_else(|| Error::RankDeficient(gamma.to_string()))
    }

    /// Least-squares coefficients of `γ` via the Gram factor.
    pub fn theta_hat(&self, gamma: &ModelIndicator) -> Result<DVector<f64>> {
        check_model(self.dataset, gamma)?;
        self.factor(gamma)
            .map(|f| f.theta())
            .ok_or_else(|| Error::RankDeficient(gamma.to_string()))
    }

    /// Posterior mean of `θ_γ` scattered into a length-`p` vector.
    pub fn shrinkage_mean_embedded(&self, gamma: &ModelIndicator) -> Result<DVector<f64>> {
        let theta = self.theta_hat(gamma)?;
        let s = self.cfg.shrinkage(self.dataset.n());
        let mut out = DVector::zeros(gamma.p());
        for (k, j) in gamma.indices().into_iter().enumerate() {
            out[j] = s * theta[k];
        }
        Ok(out)
    }

    /// Scores a model without consulting or filling the cache.
    pub fn compute_uncached(&self, gamma: &ModelIndicator) -> f64 {
        let size = gamma.size();
        if size > self.dataset.n() {
            return f64::NEG_INFINITY;
        }
        match self.factor(gamma) {
            Some(f) => {
                log_marginal_from_fit(self.dataset.n(), size, self.yty, f.fitted_sumsq(), &self.cfg)
            }
            None => f64::NEG_INFINITY,
        }
    }

    fn factor(&self, gamma: &ModelIndicator) -> Option<GramFactor> {
        if gamma.size() > self.dataset.n() {
            return None;
        }
        GramFactor::new(&self.gram, &self.xty, &gamma.indices())
    }
}

impl ModelLikelihood for MarginalEvaluator<'_> {
    fn p(&self) -> usize {
        self.dataset.p()
    }

    fn log_marginal(&self, gamma: &ModelIndicator) -> Result<f64> {
        check_model(self.dataset, gamma)?;
        if let Some(cache) = &self.cache {
            if let Some(v) = cache.get(gamma) {
                return Ok(v);
            }
            let v = self.compute_uncached(gamma);
            cache.insert(gamma.clone(), v);
            return Ok(v);
        }
        Ok(self.compute_uncached(gamma))
    }

    fn log_marginal_uncached(&self, gamma: &ModelIndicator) -> Result<f64> {
        check_model(self.dataset, gamma)?;
        Ok(self.compute_uncached(gamma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::zellner::log_marginal_unknown_var;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(20, 5, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(20, |i, _| x[(i, 0)] * 2.0 + rng.random::<f64>() - 0.5);
        Dataset::new(y, x).unwrap()
    }

    #[test]
    fn evaluator_matches_direct_formula() {
        let d = dataset(1);
        let cfg = ZellnerConfig::default();
        let ev = MarginalEvaluator::new(&d, cfg).unwrap();
        for mask in 0u64..32 {
            let g = ModelIndicator::from_mask(5, mask);
            let a = ev.log_marginal(&g).unwrap();
            let b = log_marginal_unknown_var(&d, &g, &cfg).unwrap();
            assert!((a - b).abs() < 1e-9, "{g}: {a} vs {b}");
        }
    }

    #[test]
    fn cache_is_transparent_and_counts() {
        let d = dataset(2);
        let cfg = ZellnerConfig::default();
        let plain = MarginalEvaluator::new(&d, cfg).unwrap();
        let cached = MarginalEvaluator::new(&d, cfg).unwrap().with_cache(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let g = ModelIndicator::from_mask(5, rng.random_range(0..32));
            let a = plain.log_marginal(&g).unwrap();
            let b = cached.log_marginal(&g).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let cache = cached.cache().unwrap();
        assert!(cache.len() <= 8);
        assert_eq!(cache.hits() + cache.misses(), 500);
        assert!(cache.hits() > 0);
    }

    #[test]
    fn cached_value_matches_recomputation() {
        let d = dataset(3);
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default())
            .unwrap()
            .with_cache(64);
        let g = ModelIndicator::from_mask(5, 0b10101);
        let first = ev.log_marginal(&g).unwrap();
        let again = ev.log_marginal(&g).unwrap();
        assert!((first - ev.compute_uncached(&g)).abs() < 1e-12);
        assert_eq!(first, again);
    }

    #[test]
    fn rank_deficient_models_score_negative_infinity() {
        let mut x = DMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let col = x.column(0).clone_owned();
        x.set_column(2, &col);
        let d = Dataset::new(DVector::from_element(6, 1.0), x).unwrap();
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
        assert_eq!(
            ev.log_marginal(&ModelIndicator::from_mask(3, 0b101)).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(ev.fitted_sumsq(&ModelIndicator::from_mask(3, 0b101)).is_err());
        assert!(ev.log_marginal(&ModelIndicator::from_mask(3, 0b011)).unwrap().is_finite());
    }
}
