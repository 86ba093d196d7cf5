use std::sync::Arc;

use metabvs::ebayes::{em_fit, two_step, EStep, EmConfig, MStep};
use metabvs::harness::orthogonal_design;
use metabvs::linmodel::{Dataset, MarginalEvaluator, ZellnerConfig};
use metabvs::priors::{BlockStructure, HyperPrior, MetaCovariates};
use metabvs::rng::stream_rng;
use metabvs::sampler::GibbsConfig;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn stochastic_em_orders_blocks_by_signal_density() {
    // Block 0 holds five moderate signals, block 1 none.
    let blocks = BlockStructure::contiguous(&[15, 15]).unwrap();
    let meta = Arc::new(MetaCovariates::from_blocks(&blocks));
    let hp = HyperPrior::calibrated(&meta).unwrap();
    let mut ordered = 0;
    for seed in 0..20u64 {
        let mut rng = stream_rng(seed, 0);
        let x = DMatrix::from_fn(100, 30, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut theta = DVector::zeros(30);
        for j in [1, 4, 7, 10, 13] {
            theta[j] = 0.5;
        }
        let y = &x * theta + DVector::from_fn(100, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d = Dataset::new(y, x).unwrap();
        let ev = MarginalEvaluator::new(&d, ZellnerConfig::default()).unwrap().with_cache(1 << 14);
        let cfg = EmConfig {
            max_iters: 20,
            tol_omega: 1e-2,
            e_step: EStep::Stochastic(GibbsConfig::new(1000, seed).with_stream(1)),
            m_step: MStep::ClosedForm,
            omega_init: Some(DVector::from_element(2, (1.0f64 / 30.0 / (1.0 - 1.0 / 30.0)).ln())),
            ..EmConfig::default()
        };
        let trace = em_fit(&ev, &meta, &hp, &cfg).unwrap();
        let w = trace.omega_hat();
        if w[0] > w[1] {
            ordered += 1;
        }
    }
    assert!(ordered >= 18, "{ordered}/20");
}

#[test]
fn two_step_recovers_block_densities_under_strong_signal() {
    let mut rng = stream_rng(21, 0);
    let x = orthogonal_design(400, 20, &mut rng).unwrap();
    let mut theta = DVector::zeros(20);
    for j in [0, 3, 6, 12] {
        theta[j] = 1.5;
    }
    let y = &x * theta + DVector::from_fn(400, |_, _| rng.sample::<f64, _>(StandardNormal));
    let d = Dataset::new(y, x).unwrap();
    let ev = MarginalEvaluator::new(&d, ZellnerConfig::known(1.0, 1.0)).unwrap();
    let blocks = BlockStructure::contiguous(&[10, 10]).unwrap();
    let out = two_step(&ev, &blocks, &EStep::Exact { max_p: 20 }).unwrap();
    assert!(out.omega0.iter().all(|&w| (w - 1.0 / 21.0).abs() < 1e-15));
    assert!((out.omega1[0] - 0.3).abs() < 0.05, "{}", out.omega1[0]);
    assert!((out.omega1[1] - 0.1).abs() < 0.05, "{}", out.omega1[1]);
    assert!(out.kappa1[0] < out.kappa1[1]);
}
