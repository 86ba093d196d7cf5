use std::collections::BTreeMap;

use metabvs::linmodel::{
    bma_point_estimate, least_squares_fit, log_marginal_known_var, log_marginal_unknown_var, Dataset,
    ModelIndicator, ZellnerConfig,
};
use metabvs::math::log_sum_exp;
use metabvs::priors::ModelPrior;
use metabvs::rng::stream_rng;
use metabvs::sampler::enumerate_posterior;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

fn log_normal_density(resid_ss: f64, n: usize, var: f64) -> f64 {
    -0.5 * n as f64 * (2.0 * std::f64::consts::PI * var).ln() - resid_ss / (2.0 * var)
}

#[test]
fn known_variance_marginal_matches_monte_carlo_integral() {
    let mut rng = stream_rng(1, 0);
    let x = DMatrix::from_fn(5, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_vec(vec![0.4, -1.1, 0.8, 0.3, -0.2]);
    let d = Dataset::new(y.clone(), x.clone()).unwrap();
    let (g, phi) = (1.0, 0.7);
    let cfg = ZellnerConfig::known(g, phi);
    let gamma = ModelIndicator::full(2);
    let exact = log_marginal_known_var(&d, &gamma, &cfg).unwrap();

    // θ ~ N(0, gφ (XᵀX/n)⁻¹), sampled through a Cholesky factor.
    let cov = (x.transpose() * &x / 5.0).try_inverse().unwrap() * (g * phi);
    let l = cov.cholesky().unwrap().l();
    let draws = 400_000;
    let logs: Vec<f64> = (0..draws)
        .map(|_| {
            let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let theta = &l * z;
            log_normal_density((&y - &x * theta).norm_squared(), 5, phi)
        })
        .collect();
    let lse = log_sum_exp(&logs);
    let estimate = lse - (draws as f64).ln();
    let weights: Vec<f64> = logs.iter().map(|v| (v - lse).exp() * draws as f64).collect();
    let var = weights.iter().map(|w| (w - 1.0).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    // Standard error of the log of the mean, by the delta method.
    let se = (var / draws as f64).sqrt();
    assert!((estimate - exact).abs() < 3.0 * se + 1e-12, "{estimate} vs {exact} (se {se})");
}

#[test]
fn unknown_variance_null_model_matches_quadrature() {
    let d = Dataset::new(DVector::from_vec(vec![0.0]), DMatrix::from_element(1, 1, 1.0)).unwrap();
    let cfg = ZellnerConfig::default();
    let value = log_marginal_unknown_var(&d, &ModelIndicator::empty(1), &cfg).unwrap();

    // ∫ N(0; 0, φ) IG(φ; 0.005, 0.005) dφ on the log scale t = ln φ.
    let (a, b) = (0.005, 0.005);
    let log_const = a * f64::ln(b) - ln_gamma(a) - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let h = 1e-3;
    let logs: Vec<f64> = (0..150_000)
        .map(|k| {
            let t = -30.0 + k as f64 * h;
            log_const - (a + 0.5) * t - b * (-t).exp()
        })
        .collect();
    let quad = log_sum_exp(&logs) + h.ln();
    assert!((value - quad).abs() < 1e-6, "{value} vs {quad}");
}

#[test]
fn unknown_variance_marginal_matches_two_dimensional_quadrature() {
    let x = DMatrix::from_column_slice(6, 2, &[0.5, -1.2, 0.3, 2.0, -0.7, 0.1, 1.0, 0.2, -0.4, 0.9, 1.5, -1.1]);
    let y = DVector::from_vec(vec![0.9, -1.5, 0.2, 2.4, -0.3, 0.6]);
    let d = Dataset::new(y.clone(), x.clone()).unwrap();
    let cfg = ZellnerConfig::inverse_gamma(1.0, 0.01, 0.01);
    let gamma = ModelIndicator::from_indices(2, &[0]).unwrap();
    let value = log_marginal_unknown_var(&d, &gamma, &cfg).unwrap();

    // θ | φ ~ N(0, gφ n / xᵀx); substitute θ = √φ u and t = ln φ.
    let xc = x.column(0).clone_owned();
    let xtx = xc.norm_squared();
    let (yty, xty) = (y.norm_squared(), xc.dot(&y));
    let prior_var_u = 6.0 / xtx;
    let (a, b) = (0.005, 0.005);
    let (ht, hu) = (0.01, 0.005);
    let mut logs = Vec::with_capacity(8000 * 4000);
    for it in 0..8000 {
        let t = -25.0 + it as f64 * ht;
        let phi = t.exp();
        let log_ig = a * f64::ln(b) - ln_gamma(a) - (a + 1.0) * t - b / phi + t;
        for iu in 0..4000 {
            let u = -10.0 + iu as f64 * hu;
            let theta = phi.sqrt() * u;
            let rss = yty - 2.0 * theta * xty + theta * theta * xtx;
            let log_prior_u = -0.5 * (2.0 * std::f64::consts::PI * prior_var_u).ln() - u * u / (2.0 * prior_var_u);
            logs.push(log_normal_density(rss, 6, phi) + log_prior_u + log_ig);
        }
    }
    let quad = log_sum_exp(&logs) + (ht * hu).ln();
    assert!((value - quad).abs() < 1e-4, "{value} vs {quad}");
}

#[test]
fn bma_on_orthogonal_design_matches_coordinatewise_oracle() {
    // Orthogonal columns: each θ̂_j = x_jᵀy / n in every model containing j,
    // so the BMA mean is s · θ̂_j · pip_j.
    let mut rng = stream_rng(2, 0);
    let g = DMatrix::from_fn(12, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = g.qr().q() * 12f64.sqrt();
    let y = DVector::from_fn(12, |i, _| 0.8 * x[(i, 0)] - 0.3 * x[(i, 2)] + 0.5 * rng.sample::<f64, StandardNormal>(StandardNormal));
    let d = Dataset::new(y.clone(), x.clone()).unwrap();
    let cfg = ZellnerConfig::default();
    let ev = metabvs::linmodel::MarginalEvaluator::new(&d, cfg).unwrap();
    let post = enumerate_posterior(&ev, &ModelPrior::fixed(vec![0.5; 3]).unwrap(), 10).unwrap();
    let weights: BTreeMap<ModelIndicator, f64> = post.models().collect();
    let bma = bma_point_estimate(&weights, &d, &cfg).unwrap();
    let s = cfg.shrinkage(12);
    for j in 0..3 {
        let ols = x.column(j).dot(&y) / 12.0;
        assert!((bma[j] - s * ols * post.pip[j]).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_decomposes_total_sum_of_squares(seed in 0u64..10_000, mask in 0u64..64) {
        let mut rng = stream_rng(seed, 7);
        let n = rng.random_range(6..20);
        let x = DMatrix::from_fn(n, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * 3.0);
        let d = Dataset::new(y.clone(), x).unwrap();
        let fit = least_squares_fit(&d, &ModelIndicator::from_mask(6, mask)).unwrap();
        let yty = y.norm_squared();
        prop_assert!(fit.fitted_sumsq >= 0.0 && fit.residual_sumsq >= 0.0);
        prop_assert!((fit.fitted_sumsq + fit.residual_sumsq - yty).abs() <= 1e-8 * yty);
    }

    #[test]
    fn marginal_ratios_follow_the_closed_form(seed in 0u64..10_000, a in 0u64..32, b in 0u64..32) {
        let mut rng = stream_rng(seed, 8);
        let x = DMatrix::from_fn(25, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(25, |i, _| x[(i, 1)] + rng.sample::<f64, StandardNormal>(StandardNormal));
        let d = Dataset::new(y, x).unwrap();
        let (g, phi) = (1.0, 1.3);
        let cfg = ZellnerConfig::known(g, phi);
        let (ga, gb) = (ModelIndicator::from_mask(5, a), ModelIndicator::from_mask(5, b));
        let diff = log_marginal_known_var(&d, &ga, &cfg).unwrap() - log_marginal_known_var(&d, &gb, &cfg).unwrap();
        let fa = least_squares_fit(&d, &ga).unwrap().fitted_sumsq;
        let fb = least_squares_fit(&d, &gb).unwrap().fitted_sumsq;
        let gn = g * 25.0;
        let expected = gn * (fa - fb) / (2.0 * phi * (1.0 + gn))
            - 0.5 * (ga.size() as f64 - gb.size() as f64) * (1.0 + gn).ln();
        prop_assert!((diff - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    }
}
