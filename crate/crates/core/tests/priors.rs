use std::sync::Arc;

use metabvs::linmodel::ModelIndicator;
use metabvs::priors::{calibrate_g_omega, kappa, BlockStructure, HyperPrior, MetaCovariates, ModelPrior};
use metabvs::rng::stream_rng;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

// Standard normal upper quantile by bisection on the complementary error function.
fn upper_normal_quantile(tail: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * erfc(mid / std::f64::consts::SQRT_2) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn intercept_only_calibration() {
    let meta = MetaCovariates::intercept_only(40);
    let g = calibrate_g_omega(&meta, 0.001, 0.999, 0.95).unwrap();
    let bound = (0.999f64 / 0.001).ln();
    let expected = (bound / upper_normal_quantile(0.025)).powi(2);
    assert!((g - expected).abs() < 1e-9, "{g} vs {expected}");
    assert!((g - 12.4).abs() < 0.05);
    assert_eq!(HyperPrior::calibrated(&meta).unwrap().g_omega(), g);
}

#[test]
fn calibration_achieves_coverage_by_simulation() {
    let mut rng = stream_rng(11, 0);
    let raw = DMatrix::from_fn(30, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let meta = MetaCovariates::with_intercept(&raw);
    let hp = HyperPrior::calibrated(&meta).unwrap();
    let l = (hp.v() * hp.g_omega()).cholesky().unwrap().l();
    let draws = 20_000;
    let mut inside = 0;
    for _ in 0..draws {
        let omega = &l * DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = meta.inclusion_probs(&omega).unwrap();
        if m.iter().all(|&v| (0.001..=0.999).contains(&v)) {
            inside += 1;
        }
    }
    // Worst-case leverage makes the per-covariate bound conservative overall
    // only marginally, so the joint rate is at least near 0.95 minus a union slack.
    let rate = inside as f64 / draws as f64;
    assert!(rate > 0.8, "{rate}");
}

#[test]
fn fixed_prior_equals_intercept_only_logistic() {
    let pi0 = 0.07;
    let fixed = ModelPrior::fixed(vec![pi0; 6]).unwrap();
    let logistic = ModelPrior::logistic(
        Arc::new(MetaCovariates::intercept_only(6)),
        DVector::from_vec(vec![(pi0 / (1.0 - pi0)).ln()]),
    )
    .unwrap();
    for mask in 0..64 {
        let g = ModelIndicator::from_mask(6, mask);
        let a = fixed.log_model_prior(&g).unwrap();
        let b = logistic.log_model_prior(&g).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn block_meta_covariates_give_per_block_probabilities() {
    let blocks = BlockStructure::contiguous(&[3, 2]).unwrap();
    let meta = Arc::new(MetaCovariates::from_blocks(&blocks));
    let omega = DVector::from_vec(vec![-2.0, 1.0]);
    let m = meta.inclusion_probs(&omega).unwrap();
    let expected = [-2.0f64, -2.0, -2.0, 1.0, 1.0].map(|e| 1.0 / (1.0 + (-e).exp()));
    for (a, b) in m.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn kappa_example() {
    // g n = 99 and ω = 0.2: ½ log 100 + log 4.
    let k = kappa(0.2, 1.0, 99).unwrap();
    assert!((k - (0.5 * 100f64.ln() + 4f64.ln())).abs() < 1e-14);
    assert!(kappa(1.0, 1.0, 99).is_err());
}

proptest! {
    #[test]
    fn beta_binomial_prior_normalizes(a in 0.2f64..5.0, b in 0.2f64..5.0) {
        let prior = ModelPrior::beta_binomial(a, b).unwrap();
        let total: f64 = (0..256u64)
            .map(|mask| prior.log_model_prior(&ModelIndicator::from_mask(8, mask)).unwrap().exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn logistic_prior_normalizes(w0 in -4.0f64..4.0, w1 in -3.0f64..3.0, seed in 0u64..1000) {
        let mut rng = stream_rng(seed, 1);
        let raw = DMatrix::from_fn(7, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let prior = ModelPrior::logistic(
            Arc::new(MetaCovariates::with_intercept(&raw)),
            DVector::from_vec(vec![w0, w1]),
        ).unwrap();
        let total: f64 = (0..128u64)
            .map(|mask| prior.log_model_prior(&ModelIndicator::from_mask(7, mask)).unwrap().exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}
