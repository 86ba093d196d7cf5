use std::sync::Arc;

use metabvs::harness::orthogonal_design;
use metabvs::linmodel::{Dataset, MarginalEvaluator, ModelIndicator, ZellnerConfig};
use metabvs::math::logit;
use metabvs::priors::{MetaCovariates, ModelPrior};
use metabvs::rng::stream_rng;
use metabvs::sampler::{enumerate_posterior, run_chain, GibbsConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn orthogonal_instance(seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 0);
    let x = orthogonal_design(50, 8, &mut rng).unwrap();
    let theta = DVector::from_vec(vec![0.5, 0.0, 0.3, 0.0, 0.0, 0.25, 0.0, 0.0]);
    let y = &x * theta + DVector::from_fn(50, |_, _| rng.sample::<f64, _>(StandardNormal));
    Dataset::new(y, x).unwrap()
}

fn uniform() -> ModelPrior {
    ModelPrior::fixed(vec![0.5; 8]).unwrap()
}

#[test]
fn chain_reproduces_exact_pips_on_orthogonal_design() {
    let d = orthogonal_instance(1);
    let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap().with_cache(512);
    let exact = enumerate_posterior(&ev, &uniform(), 20).unwrap();
    let chain = run_chain(&ev, &uniform(), &GibbsConfig::new(20_000, 3)).unwrap();
    assert!((&chain.pip - &exact.pip).amax() < 0.02);
}

#[test]
fn different_seeds_differ_but_agree() {
    let d = orthogonal_instance(2);
    let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap().with_cache(512);
    let a = run_chain(&ev, &uniform(), &GibbsConfig::new(20_000, 10)).unwrap();
    let b = run_chain(&ev, &uniform(), &GibbsConfig::new(20_000, 11)).unwrap();
    assert_ne!(a.pip, b.pip);
    assert!((&a.pip - &b.pip).amax() < 0.03);
}

#[test]
fn start_state_does_not_matter() {
    let mut rng = stream_rng(3, 0);
    let x = DMatrix::from_fn(40, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(40, |i, _| 0.6 * x[(i, 0)] - 0.4 * x[(i, 3)] + rng.sample::<f64, StandardNormal>(StandardNormal));
    let d = Dataset::new(y, x).unwrap();
    let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap().with_cache(512);
    let prior = ModelPrior::beta_binomial(1.0, 1.0).unwrap();
    let mode = enumerate_posterior(&ev, &prior, 20).unwrap().mode();
    let from_empty = run_chain(&ev, &prior, &GibbsConfig::new(20_000, 4)).unwrap();
    let from_mode = run_chain(&ev, &prior, &GibbsConfig::new(20_000, 5).with_init(mode)).unwrap();
    assert!((&from_empty.pip - &from_mode.pip).amax() < 0.03);
}

#[test]
fn single_sweep_on_zero_response_is_reproducible() {
    let mut rng = stream_rng(4, 0);
    let x = DMatrix::from_fn(10, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let d = Dataset::new(DVector::zeros(10), x).unwrap();
    let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
    let cfg = GibbsConfig::new(1, 9).with_burn_in(0);
    let prior = ModelPrior::fixed(vec![0.5; 4]).unwrap();
    let a = run_chain(&ev, &prior, &cfg).unwrap();
    let b = run_chain(&ev, &prior, &cfg).unwrap();
    assert!(a.pip.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(a, b);
}

#[test]
fn log_evidence_is_permutation_invariant() {
    let mut rng = stream_rng(5, 0);
    let x = DMatrix::from_fn(30, 7, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(30, |i, _| x[(i, 2)] + rng.sample::<f64, StandardNormal>(StandardNormal));
    let d = Dataset::new(y, x).unwrap();
    let raw = DMatrix::from_fn(7, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let meta = MetaCovariates::with_intercept(&raw);
    let omega = DVector::from_vec(vec![-1.0, 0.7]);
    let perm = [4, 0, 6, 2, 1, 5, 3];

    let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
    let base = enumerate_posterior(&ev, &ModelPrior::logistic(Arc::new(meta.clone()), omega.clone()).unwrap(), 20).unwrap();
    let dp = d.permute_columns(&perm);
    let evp = MarginalEvaluator::new(&dp, ZellnerConfig::default()).unwrap();
    let prior = ModelPrior::logistic(Arc::new(meta.permute_rows(&perm)), omega).unwrap();
    let permuted = enumerate_posterior(&evp, &prior, 20).unwrap();
    assert!((base.log_evidence - permuted.log_evidence).abs() < 1e-10);
    for (k, &j) in perm.iter().enumerate() {
        assert!((permuted.pip[k] - base.pip[j]).abs() < 1e-10);
    }
}

#[test]
fn fixed_and_intercept_only_logistic_priors_agree() {
    let d = orthogonal_instance(6);
    let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
    let pi0 = 0.13;
    let fixed = enumerate_posterior(&ev, &ModelPrior::fixed(vec![pi0; 8]).unwrap(), 20).unwrap();
    let meta = Arc::new(MetaCovariates::intercept_only(8));
    let logistic = ModelPrior::logistic(meta, DVector::from_vec(vec![logit(pi0)])).unwrap();
    let via_omega = enumerate_posterior(&ev, &logistic, 20).unwrap();
    assert!((fixed.log_evidence - via_omega.log_evidence).abs() < 1e-12);
    for (a, b) in fixed.probs.iter().zip(&via_omega.probs) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn too_many_covariates_for_enumeration() {
    let d = Dataset::new(DVector::zeros(3), DMatrix::from_fn(3, 5, |i, j| (i + j) as f64)).unwrap();
    let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap();
    assert!(enumerate_posterior(&ev, &ModelPrior::fixed(vec![0.5; 5]).unwrap(), 4).is_err());
    let _ = ModelIndicator::empty(5);
}
