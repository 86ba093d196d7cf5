//! Simulation studies and their metrics, design diagnostics for the
//! consistency conditions, and leave-one-out prediction.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linmodel::{Dataset, ModelIndicator};
use crate::math::{logit, sigmoid};
use crate::pipeline::{fit_model, FitMethod, FitSettings, Prepared};
use crate::priors::{kappa, BlockStructure, MetaCovariates};
use crate::rng::{stream_rng, substream, StreamRng};

/// Largest `p` for which [`rho_x`] enumerates models.
pub const RHO_MAX_P: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// Meta-covariates excluding the intercept.
    pub q: usize,
    /// Intercept first, then one coefficient per meta-covariate.
    pub omega_true: DVector<f64>,
    pub x_corr: f64,
    pub meta_corr: f64,
    pub theta_range: (f64, f64),
    pub n_reps: usize,
    pub seed: u64,
    pub pip_threshold: f64,
}

impl ScenarioConfig {
    /// Two meta-covariates with coefficients `(logit 0.05, omega1, 0)`.
    pub fn new(name: &str, n: usize, p: usize, omega1: f64) -> Self {
        ScenarioConfig {
            name: name.to_string(),
            n,
            p,
            q: 2,
            omega_true: DVector::from_vec(vec![logit(0.05), omega1, 0.0]),
            x_corr: 0.5,
            meta_corr: 0.5,
            theta_range: (1.0 / 3.0, 2.0 / 3.0),
            n_reps: 20,
            seed: 1,
            pip_threshold: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 2 || self.p == 0 {
            return bad(format!("need n ≥ 2 and p ≥ 1, got n={}, p={}", self.n, self.p));
        }
        if self.omega_true.len() != self.q + 1 {
            return bad(format!(
                "omega_true has length {}, expected q + 1 = {}",
                self.omega_true.len(),
                self.q + 1
            ));
        }
        if !(0.0..1.0).contains(&self.x_corr) || !(0.0..1.0).contains(&self.meta_corr) {
            return bad("correlations must lie in [0, 1)".into());
        }
        let (lo, hi) = self.theta_range;
        if !(lo < hi) {
            return bad(format!("theta range ({lo}, {hi}) is empty"));
        }
        if !(self.pip_threshold > 0.0 && self.pip_threshold <= 1.0) {
            return bad(format!("threshold {} outside (0, 1]", self.pip_threshold));
        }
        if self.n_reps == 0 {
            return bad("n_reps must be at least 1".into());
        }
        Ok(())
    }

    /// Seed of replicate `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        substream(self.seed, rep as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub gamma_star: ModelIndicator,
    pub theta_star: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: Dataset,
    /// Meta-covariates with the intercept in column 0.
    pub meta: MetaCovariates,
    pub truth: Truth,
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// `rows × cols` Gaussians with unit variance and within-row correlation
/// `rho`, from the one-factor construction `√ρ w_i + √(1−ρ) e_ij`.
fn equicorrelated(rows: usize, cols: usize, rho: f64, rng: &mut StreamRng) -> DMatrix<f64> {
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let w = normal(rng);
        for j in 0..cols {
            m[(i, j)] = a * w + b * normal(rng);
        }
    }
    m
}

/// Values uniformly spaced on `[lo, hi]`; a single value sits at the midpoint.
pub fn spaced_values(k: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Draws one replicate. Identical `(cfg, rep)` give bit-identical output.
pub fn simulate_dataset(cfg: &ScenarioConfig, rep: usize) -> Result<SimulatedData> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.rep_seed(rep), 0);
    let raw = equicorrelated(cfg.p, cfg.q, cfg.meta_corr, &mut rng);
    let meta = MetaCovariates::with_intercept(&raw);
    let probs = meta.inclusion_probs(&cfg.omega_true)?;
    let active: Vec<usize> = (0..cfg.p).filter(|&j| rng.random::<f64>() < probs[j]).collect();
    let mut theta = DVector::zeros(cfg.p);
    for (&j, v) in active.iter().zip(spaced_values(active.len(), cfg.theta_range)) {
        theta[j] = v;
    }
    let x = equicorrelated(cfg.n, cfg.p, cfg.x_corr, &mut rng);
    let noise = DVector::from_fn(cfg.n, |_, _| normal(&mut rng));
    let y = &x * &theta + noise;
    Ok(SimulatedData {
        dataset: Dataset::new(y, x)?,
        meta,
        truth: Truth {
            gamma_star: ModelIndicator::from_indices(cfg.p, &active)?,
            theta_star: theta,
        },
    })
}

/// `n × p` design with `XᵀX = n I`.
pub fn orthogonal_design(n: usize, p: usize, rng: &mut StreamRng) -> Result<DMatrix<f64>> {
    if p > n {
        return Err(Error::DimensionMismatch(format!("orthogonal design needs p ≤ n, got p={p}, n={n}")));
    }
    let g = DMatrix::from_fn(n, p, |_, _| normal(rng));
    Ok(g.qr().q() * (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `‖θ̂ − θ*‖²`.
    pub mse: f64,
    pub power: f64,
    pub fdr: f64,
}

/// Selection by `pip ≥ threshold`. Power is 1 when nothing is truly active;
/// FDR is 0 when nothing is selected.
pub fn compute_metrics(theta_hat: &DVector<f64>, pip: &DVector<f64>, truth: &Truth, threshold: f64) -> Result<Metrics> {
    let p = truth.theta_star.len();
    if theta_hat.len() != p || pip.len() != p || truth.gamma_star.p() != p {
        return Err(Error::DimensionMismatch("metric inputs must all have length p".into()));
    }
    let mse = (theta_hat - &truth.theta_star).norm_squared();
    let (mut tp, mut fp) = (0usize, 0usize);
    for j in 0..p {
        if pip[j] >= threshold {
            if truth.gamma_star.contains(j) {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let active = truth.gamma_star.size();
    Ok(Metrics {
        mse,
        power: if active == 0 { 1.0 } else { tp as f64 / active as f64 },
        fdr: fp as f64 / (tp + fp).max(1) as f64,
    })
}

/// Methods compared in simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StudyMethod {
    /// Empirical Bayes with intercept and meta-covariates.
    EbayesMeta,
    /// Empirical Bayes with an intercept only.
    EbayesIntercept,
    /// Beta-Binomial(1, 1).
    BetaBinomial,
}

impl StudyMethod {
    pub const ALL: [StudyMethod; 3] = [
        StudyMethod::EbayesMeta,
        StudyMethod::EbayesIntercept,
        StudyMethod::BetaBinomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyMethod::EbayesMeta => "ebayes_meta",
            StudyMethod::EbayesIntercept => "ebayes_intercept",
            StudyMethod::BetaBinomial => "beta_binomial",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for StudyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown study method '{s}'")))
    }
}

/// Fits one study method to a simulated replicate; returns `(θ̂, pip)`.
pub fn fit_study_method(
    sim: &SimulatedData,
    method: StudyMethod,
    settings: &FitSettings,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let p = sim.dataset.p();
    let ebayes = if p <= settings.max_enumerate {
        FitMethod::EmExact
    } else {
        FitMethod::EmGibbs
    };
    let (meta, fm) = match method {
        StudyMethod::EbayesMeta => (Arc::new(sim.meta.clone()), ebayes),
        StudyMethod::EbayesIntercept => (Arc::new(MetaCovariates::intercept_only(p)), ebayes),
        StudyMethod::BetaBinomial => (Arc::new(MetaCovariates::intercept_only(p)), FitMethod::BetaBinomial),
    };
    let out = fit_model(&sim.dataset, &meta, fm, settings)?;
    Ok((out.bma, out.pip))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scenario: String,
    pub method: String,
    /// `None` for rows averaging over replicates.
    pub rep: Option<usize>,
    pub mse: f64,
    pub power: f64,
    pub fdr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepFailure {
    pub rep: usize,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    /// Per-replicate rows in replicate order, methods in the order requested.
    pub rows: Vec<MetricRow>,
    /// One row per method, averaging its successful replicates.
    pub means: Vec<MetricRow>,
    pub failures: Vec<RepFailure>,
}

impl ScenarioReport {
    pub fn mean_for(&self, method: StudyMethod) -> Option<&MetricRow> {
        self.means.iter().find(|r| r.method == method.name())
    }
}

/// Runs every replicate of a scenario in parallel. Replicate `r` uses seed
/// `substream(cfg.seed, r)` for simulation and for each method's samplers,
/// so the table does not depend on scheduling.
pub fn run_scenario(cfg: &ScenarioConfig, methods: &[StudyMethod], settings: &FitSettings) -> Result<ScenarioReport> {
    cfg.validate()?;
    let per_rep: Vec<Vec<std::result::Result<MetricRow, RepFailure>>> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| {
            let sim = simulate_dataset(cfg, rep);
            methods
                .iter()
                .map(|&m| {
                    let fail = |e: Error| RepFailure {
                        rep,
                        method: m.name().to_string(),
                        message: e.to_string(),
                    };
                    let sim = sim.as_ref().map_err(|e| fail(e.clone()))?;
                    let s = FitSettings {
                        seed: cfg.rep_seed(rep),
                        stream: m.index(),
                        ..settings.clone()
                    };
                    let (theta, pip) = fit_study_method(sim, m, &s).map_err(fail)?;
                    let met = compute_metrics(&theta, &pip, &sim.truth, cfg.pip_threshold).map_err(fail)?;
                    Ok(MetricRow {
                        scenario: cfg.name.clone(),
                        method: m.name().to_string(),
                        rep: Some(rep),
                        mse: met.mse,
                        power: met.power,
                        fdr: met.fdr,
                    })
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in per_rep.into_iter().flatten() {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    let means = methods
        .iter()
        .filter_map(|m| {
            let mine: Vec<&MetricRow> = rows.iter().filter(|r| r.method == m.name()).collect();
            if mine.is_empty() {
                return None;
            }
            let k = mine.len() as f64;
            Some(MetricRow {
                scenario: cfg.name.clone(),
                method: m.name().to_string(),
                rep: None,
                mse: mine.iter().map(|r| r.mse).sum::<f64>() / k,
                power: mine.iter().map(|r| r.power).sum::<f64>() / k,
                fdr: mine.iter().map(|r| r.fdr).sum::<f64>() / k,
            })
        })
        .collect();
    Ok(ScenarioReport { rows, means, failures })
}

/// Orthonormal basis of the column space of `a` (rank by SVD).
fn column_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-10 * smax.max(f64::MIN_POSITIVE))
        .collect();
    u.select_columns(&keep)
}

/// `min` over models `γ` not containing `γ*` of
/// `λ_min((1/n) X_{γ*∖γ}ᵀ (I − P_γ) X_{γ*∖γ})`.
///
/// Returns `+inf` when `γ*` is empty (every model contains it).
pub fn rho_x(x: &DMatrix<f64>, gamma_star: &ModelIndicator, max_p: usize) -> Result<f64> {
    let (n, p) = x.shape();
    if gamma_star.p() != p {
        return Err(Error::DimensionMismatch("γ* does not match the columns of X".into()));
    }
    if p > max_p || p >= 64 {
        return Err(Error::TooLarge { p, max: max_p });
    }
    let star = gamma_star.indices();
    let star_mask = star.iter().fold(0u64, |m, &j| m | (1 << j));
    let terms: Vec<f64> = (0u64..1 << p)
        .into_par_iter()
        .filter(|mask| mask & star_mask != star_mask)
        .map(|mask| {
            let inside: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 1).collect();
            let missing: Vec<usize> = star.iter().copied().filter(|&j| mask >> j & 1 == 0).collect();
            let a = x.select_columns(&missing);
            let q = column_basis(&x.select_columns(&inside));
            let resid = &a - &q * (q.transpose() * &a);
            let m = resid.transpose() * resid / n as f64;
            SymmetricEigen::new(m).eigenvalues.min().max(0.0)
        })
        .collect();
    Ok(terms.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryDiagnostics {
    /// `None` when `p` exceeds the enumeration limit.
    pub rho: Option<f64>,
    pub kappa_per_block: DVector<f64>,
    /// Smallest `|θ*_j|` among active covariates of each block (`+inf` if none).
    pub theta_min_per_block: DVector<f64>,
    pub s_per_block: Vec<usize>,
    pub p_per_block: Vec<usize>,
}

impl TheoryDiagnostics {
    pub fn compute(
        x: &DMatrix<f64>,
        truth: &Truth,
        blocks: &BlockStructure,
        omega_per_block: &[f64],
        g_theta: f64,
    ) -> Result<Self> {
        let p = x.ncols();
        if blocks.p() != p || omega_per_block.len() != blocks.n_blocks() {
            return Err(Error::DimensionMismatch("blocks, ω and X disagree".into()));
        }
        let rho = if p <= RHO_MAX_P {
            Some(rho_x(x, &truth.gamma_star, RHO_MAX_P)?)
        } else {
            None
        };
        let nb = blocks.n_blocks();
        let mut s = vec![0usize; nb];
        let mut theta_min = DVector::from_element(nb, f64::INFINITY);
        for j in truth.gamma_star.indices() {
            let b = blocks.label(j);
            s[b] += 1;
            theta_min[b] = theta_min[b].min(truth.theta_star[j].abs());
        }
        let kappas = omega_per_block
            .iter()
            .map(|&w| kappa(w, g_theta, x.nrows()))
            .collect::<Result<Vec<_>>>()?;
        Ok(TheoryDiagnostics {
            rho,
            kappa_per_block: DVector::from_vec(kappas),
            theta_min_per_block: theta_min,
            s_per_block: s,
            p_per_block: blocks.sizes().to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvResult {
    pub r2: f64,
    pub predictions: DVector<f64>,
}

/// Squared Pearson correlation.
pub fn squared_correlation(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let (ma, mb) = (a.mean(), b.mean());
    let da = a.map(|v| v - ma);
    let db = b.map(|v| v - mb);
    let (saa, sbb) = (da.norm_squared(), db.norm_squared());
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let sab = da.dot(&db);
    Ok(sab * sab / (saa * sbb))
}

/// Leave-one-out predictive R². The data are centered (and, with
/// `standardize`, scaled) once on all rows; each fold then refits on the
/// remaining prepared rows and predicts the held-out response from the BMA
/// coefficients. Re-centering `y` inside each fold would make the prediction
/// carry `−y_i/(n−1)` and anticorrelate with the outcome under the null.
pub fn loocv_r2(
    dataset: &Dataset,
    meta: &Arc<MetaCovariates>,
    method: FitMethod,
    settings: &FitSettings,
    standardize: bool,
) -> Result<LoocvResult> {
    let n = dataset.n();
    if n < 3 {
        return Err(Error::DimensionMismatch(format!("leave-one-out needs n ≥ 3, got {n}")));
    }
    let prep = Prepared::new(dataset, standardize)?;
    let preds: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = FitSettings {
                stream: substream(settings.stream, i as u64),
                ..settings.clone()
            };
            let fit = fit_model(&prep.dataset.without_row(i), meta, method, &s)?;
            let fitted = prep.dataset.x().row(i).transpose().dot(&fit.bma);
            Ok(prep.y_mean + prep.y_sd * fitted)
        })
        .collect::<Result<_>>()?;
    let predictions = DVector::from_vec(preds);
    Ok(LoocvResult {
        r2: squared_correlation(&predictions, dataset.y())?,
        predictions,
    })
}

/// Fraction of `draws` hyperprior draws for which every `m_j(ω)` lies in
/// `[lo, hi]`, for the covariate with the largest leverage.
pub fn coverage_probability<R: Rng + ?Sized>(
    meta: &MetaCovariates,
    g_omega: f64,
    bounds: (f64, f64),
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    let lev = meta.leverages()?;
    let worst = (0..lev.len()).fold(0, |b, j| if lev[j] > lev[b] { j } else { b });
    let v = meta.default_v()?;
    let l = v
        .clone()
        .cholesky()
        .ok_or(Error::RankDeficientZ)?
        .l()
        * g_omega.sqrt();
    let zj = meta.matrix().row(worst).transpose();
    let q = meta.q();
    let mut hits = 0usize;
    for _ in 0..draws {
        let xi = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = sigmoid(zj.dot(&(&l * xi)));
        if m >= bounds.0 && m <= bounds.1 {
            hits += 1;
        }
    }
    Ok(hits as f64 / draws as f64)
}
