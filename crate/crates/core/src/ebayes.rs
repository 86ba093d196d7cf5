//! Empirical-Bayes estimation of the meta-covariate coefficients `ω`.
//!
//! All routines here work with the logistic prior `m_j(ω) = σ(z_jᵀω)` and the
//! Gaussian hyperprior `ω ~ N(0, g_omega V)`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linmodel::{MarginalEvaluator, ModelIndicator, ModelLikelihood};
use crate::math::{log_sigmoid, logit, sigmoid};
use crate::priors::{kappa, log_hyperprior_and_grad, BlockStructure, HyperPrior, MetaCovariates, ModelPrior};
use crate::rng::{stream_rng, substream};
use crate::sampler::{
    enumerate_posterior, run_chain, start_state, sweep, ExactPosterior, GibbsConfig, ModelSpace,
    DEFAULT_MAX_ENUMERATE,
};

/// How posterior inclusion probabilities are obtained at the current `ω`.
#[derive(Debug, Clone, PartialEq)]
pub enum EStep {
    /// Full enumeration of the model space, `p ≤ max_p`.
    Exact { max_p: usize },
    /// Inclusion frequencies from a Gibbs chain.
    Stochastic(GibbsConfig),
}

impl Default for EStep {
    fn default() -> Self {
        EStep::Exact {
            max_p: DEFAULT_MAX_ENUMERATE,
        }
    }
}

/// Which maximizer to use for the M-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MStep {
    /// Closed form when `Z` is block structured with the default `V`, Newton otherwise.
    #[default]
    Auto,
    Newton,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `‖ω⁽ᵏ⁺¹⁾ − ω⁽ᵏ⁾‖∞` drops below this.
    pub tol_omega: f64,
    pub e_step: EStep,
    pub m_step: MStep,
    pub newton_max: usize,
    /// Gradient sup-norm at which a Newton M-step is considered converged.
    pub newton_tol: f64,
    /// Starting point; zero when `None`.
    pub omega_init: Option<DVector<f64>>,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 500,
            tol_omega: 1e-8,
            e_step: EStep::default(),
            m_step: MStep::Auto,
            newton_max: 100,
            newton_tol: 1e-10,
            omega_init: None,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.newton_max == 0 {
            return Err(Error::InvalidConfig("iteration limits must be at least 1".into()));
        }
        if !(self.tol_omega > 0.0 && self.newton_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if let EStep::Stochastic(g) = &self.e_step {
            g.validate()?;
        }
        Ok(())
    }
}

/// Starting point with the intercept at `logit(1/(p+1))` and all other
/// coefficients zero, so every covariate starts with prior probability
/// `1/(p+1)`.
pub fn sparse_start(meta: &MetaCovariates) -> Result<DVector<f64>> {
    let k = meta
        .intercept_column()
        .ok_or_else(|| Error::InvalidConfig("sparse start needs an intercept column".into()))?;
    let mut omega = DVector::zeros(meta.q());
    omega[k] = logit(1.0 / (meta.p() as f64 + 1.0));
    Ok(omega)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    /// `ω⁽⁰⁾, …, ω⁽ᴷ⁾`.
    pub omegas: Vec<DVector<f64>>,
    /// `log p(y|ω⁽ᵏ⁾) + log π(ω⁽ᵏ⁾)` up to a constant, one per entry of
    /// `omegas`; only available with an exact E-step.
    pub objective: Option<Vec<f64>>,
    /// Inclusion probabilities from the last E-step.
    pub pips: DVector<f64>,
    pub converged: bool,
    /// Number of M-steps whose Newton iteration hit its limit.
    pub mstep_failures: usize,
}

impl EmTrace {
    pub fn omega_hat(&self) -> &DVector<f64> {
        self.omegas.last().expect("trace always holds the starting point")
    }

    pub fn iterations(&self) -> usize {
        self.omegas.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepResult {
    pub omega0: DVector<f64>,
    pub omega1: DVector<f64>,
    pub kappa0: DVector<f64>,
    /// `±inf` for blocks whose `ω⁽¹⁾` sits on the boundary of `[0, 1]`.
    pub kappa1: DVector<f64>,
    /// Inclusion probabilities under `ω⁽⁰⁾`.
    pub pip: DVector<f64>,
}

fn check_len(name: &str, v: &DVector<f64>, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    Ok(())
}

/// `Zᵀ(pip − prior_probs)`. With exact posterior inclusion probabilities this
/// is the gradient of `log p(y|ω)`.
pub fn marginal_loglik_gradient(
    pip: &DVector<f64>,
    prior_probs: &DVector<f64>,
    meta: &MetaCovariates,
) -> Result<DVector<f64>> {
    check_len("pip", pip, meta.p())?;
    check_len("prior_probs", prior_probs, meta.p())?;
    Ok(meta.matrix().transpose() * (pip - prior_probs))
}

/// `f(ω) = Σ_j π̂_j log m_j(ω) + (1 − π̂_j) log(1 − m_j(ω))`.
pub fn em_objective(pip_hat: &DVector<f64>, omega: &DVector<f64>, meta: &MetaCovariates) -> Result<f64> {
    check_len("pip_hat", pip_hat, meta.p())?;
    let eta = meta.linear_predictor(omega)?;
    Ok(eta
        .iter()
        .zip(pip_hat.iter())
        .map(|(&e, &w)| w * log_sigmoid(e) + (1.0 - w) * log_sigmoid(-e))
        .sum())
}

/// Gradient `Zᵀ(π̂ − m(ω))` and Hessian `−Zᵀ diag(m(1−m)) Z` of [`em_objective`].
pub fn em_objective_grad_hess(
    pip_hat: &DVector<f64>,
    omega: &DVector<f64>,
    meta: &MetaCovariates,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_len("pip_hat", pip_hat, meta.p())?;
    let m = meta.inclusion_probs(omega)?;
    let z = meta.matrix();
    let grad = z.transpose() * (pip_hat - &m);
    let mut weighted = z.clone();
    for (j, mut row) in weighted.row_iter_mut().enumerate() {
        row *= m[j] * (1.0 - m[j]);
    }
    let hess = -(z.transpose() * weighted);
    Ok((grad, hess))
}

fn penalized(pip_hat: &DVector<f64>, omega: &DVector<f64>, meta: &MetaCovariates, hp: &HyperPrior) -> Result<f64> {
    Ok(em_objective(pip_hat, omega, meta)? + log_hyperprior_and_grad(omega, hp)?.0)
}

struct NewtonOutcome {
    omega: DVector<f64>,
    grad_norm: f64,
    converged: bool,
}

fn newton_solve(
    pip_hat: &DVector<f64>,
    meta: &MetaCovariates,
    hp: &HyperPrior,
    start: &DVector<f64>,
    max_iters: usize,
    tol: f64,
) -> Result<NewtonOutcome> {
    check_len("pip_hat", pip_hat, meta.p())?;
    if hp.q() != meta.q() {
        return Err(Error::DimensionMismatch(format!(
            "hyperprior has dimension {}, Z has {} columns",
            hp.q(),
            meta.q()
        )));
    }
    let precision = hp.precision();
    let mut omega = start.clone();
    let mut value = penalized(pip_hat, &omega, meta, hp)?;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..max_iters {
        let (g, h) = em_objective_grad_hess(pip_hat, &omega, meta)?;
        let grad = g - &precision * &omega;
        grad_norm = grad.amax();
        if grad_norm < tol {
            return Ok(NewtonOutcome {
                omega,
                grad_norm,
                converged: true,
            });
        }
        let neg_hess = -h + &precision;
        let step = match neg_hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => match neg_hess.lu().solve(&grad) {
                Some(s) => s,
                None => break,
            },
        };
        // Halve until the penalized objective does not decrease; the slack
        // absorbs rounding once the iterate sits at the optimum.
        let slack = 1e-14 * (1.0 + value.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let cand = &omega + &step * t;
            let v = penalized(pip_hat, &cand, meta, hp)?;
            if v >= value - slack {
                omega = cand;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (g, _) = em_objective_grad_hess(pip_hat, &omega, meta)?;
    let final_norm = (g - &precision * &omega).amax();
    grad_norm = grad_norm.min(final_norm);
    Ok(NewtonOutcome {
        omega,
        grad_norm,
        converged: final_norm < tol,
    })
}

/// Maximizes `f(ω) + log π(ω)` by damped Newton from `start` (zero when
/// `None`). The objective is strictly concave for full-rank `Z`.
pub fn mstep_newton(
    pip_hat: &DVector<f64>,
    meta: &MetaCovariates,
    hp: &HyperPrior,
    cfg: &EmConfig,
    start: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let zero = DVector::zeros(meta.q());
    let out = newton_solve(pip_hat, meta, hp, start.unwrap_or(&zero), cfg.newton_max, cfg.newton_tol)?;
    if out.converged {
        Ok(out.omega)
    } else {
        Err(Error::NoConvergence {
            iters: cfg.newton_max,
            grad_norm: out.grad_norm,
        })
    }
}

/// Solves `σ(w) + w/c = a` for `w`. `c = +inf` reduces to `logit(a)`.
pub fn solve_h(a: f64, c: f64) -> Result<f64> {
    if c.is_nan() || !(c > 0.0) || !a.is_finite() {
        return Err(Error::DomainError(if a.is_finite() { c } else { a }));
    }
    if c.is_infinite() {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::DomainError(a));
        }
        return Ok(logit(a));
    }
    // σ ∈ (0,1) pins the root inside [c(a−1), ca].
    let resid = |w: f64| sigmoid(w) + w / c - a;
    let mut lo = c * (a - 1.0);
    let mut hi = c * a;
    let mut w = if a > 0.0 && a < 1.0 {
        logit(a).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..500 {
        let f = resid(w);
        if f == 0.0 {
            return Ok(w);
        }
        if f > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let s = sigmoid(w);
        let next = w - f / (s * (1.0 - s) + 1.0 / c);
        let bisect = 0.5 * (lo + hi);
        let next = if next > lo && next < hi { next } else { bisect };
        if (next - w).abs() <= 1e-16 * w.abs().max(1.0) || hi - lo <= 1e-16 * hi.abs().max(lo.abs()).max(1.0) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

/// Exact M-step for block designs with the default hyperprior
/// `N(0, g_omega (ZᵀZ/p)⁻¹)`.
///
/// Each row of `Z` is one of `q` distinct rows `U`, so `ZU⁻¹` has unit-vector
/// rows; block `k`'s score equation then decouples into `h(a_k, g p)` with
/// `a_k` the mean of `π̂` over rows equal to `U_k`.
pub fn mstep_closed_form(pip_hat: &DVector<f64>, meta: &MetaCovariates, g_omega: f64) -> Result<DVector<f64>> {
    check_len("pip_hat", pip_hat, meta.p())?;
    if !(g_omega > 0.0) {
        return Err(Error::InvalidHyper(format!("g_omega must be positive, got {g_omega}")));
    }
    let (unique, membership) = unique_rows(meta.matrix());
    let q = meta.q();
    if unique.len() != q {
        return Err(Error::NotBlockStructured(format!(
            "{} distinct rows for {q} columns",
            unique.len()
        )));
    }
    let u = DMatrix::from_fn(q, q, |r, c| unique[r][c]);
    let u_inv = u
        .try_inverse()
        .ok_or_else(|| Error::NotBlockStructured("distinct rows are linearly dependent".into()))?;
    let mut sums = vec![0.0; q];
    let mut counts = vec![0usize; q];
    for (j, &k) in membership.iter().enumerate() {
        sums[k] += pip_hat[j];
        counts[k] += 1;
    }
    let c = g_omega * meta.p() as f64;
    let mut tilde = DVector::zeros(q);
    for k in 0..q {
        tilde[k] = solve_h(sums[k] / counts[k] as f64, c)?;
    }
    Ok(u_inv * tilde)
}

fn unique_rows(z: &DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut membership = Vec::with_capacity(z.nrows());
    for r in 0..z.nrows() {
        let row: Vec<f64> = z.row(r).iter().map(|&v| if v == 0.0 { 0.0 } else { v }).collect();
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let next = rows.len();
        let k = *index.entry(key).or_insert(next);
        if k == next {
            rows.push(row);
        }
        membership.push(k);
    }
    (rows, membership)
}

/// `log p(y|ω) + log π(ω)` up to a constant, by enumeration.
pub fn log_posterior_omega(
    space: &ModelSpace,
    meta: &Arc<MetaCovariates>,
    hp: &HyperPrior,
    omega: &DVector<f64>,
) -> Result<f64> {
    let post = space.posterior(&ModelPrior::logistic(meta.clone(), omega.clone())?)?;
    Ok(post.log_evidence + log_hyperprior_and_grad(omega, hp)?.0)
}

fn use_closed_form(choice: MStep, meta: &MetaCovariates, hp: &HyperPrior) -> Result<bool> {
    let qualifies = || hp.is_default_for(meta) && unique_rows(meta.matrix()).0.len() == meta.q();
    Ok(match choice {
        MStep::Newton => false,
        MStep::Auto => qualifies(),
        MStep::ClosedForm => {
            if !hp.is_default_for(meta) {
                return Err(Error::InvalidConfig(
                    "closed-form M-step needs the default hyperprior covariance".into(),
                ));
            }
            true
        }
    })
}

/// EM for the posterior mode of `ω`.
pub fn em_fit<L: ModelLikelihood + ?Sized>(
    lik: &L,
    meta: &Arc<MetaCovariates>,
    hp: &HyperPrior,
    cfg: &EmConfig,
) -> Result<EmTrace> {
    cfg.validate()?;
    let p = lik.p();
    if meta.p() != p {
        return Err(Error::DimensionMismatch(format!("Z has {} rows, expected {p}", meta.p())));
    }
    if hp.q() != meta.q() {
        return Err(Error::DimensionMismatch(format!(
            "hyperprior has dimension {}, Z has {} columns",
            hp.q(),
            meta.q()
        )));
    }
    let mut omega = match &cfg.omega_init {
        Some(w) => {
            check_len("omega_init", w, meta.q())?;
            w.clone()
        }
        None => DVector::zeros(meta.q()),
    };
    let closed = use_closed_form(cfg.m_step, meta, hp)?;
    let space = match &cfg.e_step {
        EStep::Exact { max_p } => Some(ModelSpace::build(lik, *max_p)?),
        EStep::Stochastic(_) => None,
    };

    let mut omegas = vec![omega.clone()];
    let mut objective = space.as_ref().map(|_| Vec::new());
    let mut pips = DVector::zeros(p);
    let mut converged = false;
    let mut mstep_failures = 0;
    let mut warm: Option<ModelIndicator> = None;

    for k in 0..cfg.max_iters {
        let prior = ModelPrior::logistic(meta.clone(), omega.clone())?;
        let newton_tol = match (&cfg.e_step, &space) {
            (EStep::Exact { .. }, Some(space)) => {
                let post = space.posterior(&prior)?;
                if let Some(obj) = objective.as_mut() {
                    obj.push(post.log_evidence + log_hyperprior_and_grad(&omega, hp)?.0);
                }
                pips = post.pip;
                cfg.newton_tol
            }
            (EStep::Stochastic(base), _) => {
                let mut gcfg = base.clone().with_stream(substream(base.stream, k as u64));
                if let Some(w) = warm.take() {
                    gcfg = gcfg.with_init(w);
                }
                let chain = run_chain(lik, &prior, &gcfg)?;
                warm = Some(chain.final_state);
                pips = chain.pip;
                cfg.newton_tol.max(1.0 / (chain.n_kept as f64).sqrt())
            }
            _ => unreachable!("exact E-step always builds the model space"),
        };

        let next = if closed {
            mstep_closed_form(&pips, meta, hp.g_omega())?
        } else {
            let out = newton_solve(&pips, meta, hp, &omega, cfg.newton_max, newton_tol)?;
            if !out.converged {
                mstep_failures += 1;
            }
            out.omega
        };
        let moved = (&next - &omega).amax();
        omega = next;
        omegas.push(omega.clone());
        if moved < cfg.tol_omega {
            converged = true;
            break;
        }
    }

    if let (Some(space), Some(obj)) = (&space, objective.as_mut()) {
        let post = space.posterior(&ModelPrior::logistic(meta.clone(), omega.clone())?)?;
        obj.push(post.log_evidence + log_hyperprior_and_grad(&omega, hp)?.0);
        pips = post.pip;
    }
    Ok(EmTrace {
        omegas,
        objective,
        pips,
        converged,
        mstep_failures,
    })
}

/// Two-step block estimator: PIPs under `ω⁽⁰⁾_b = 1/(p+1)`, then
/// `ω⁽¹⁾_b` = mean PIP within block `b`.
pub fn two_step(ev: &MarginalEvaluator<'_>, blocks: &BlockStructure, e_step: &EStep) -> Result<TwoStepResult> {
    let p = ev.p();
    if blocks.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "block labels cover {} covariates, dataset has {p}",
            blocks.p()
        )));
    }
    let n = ev.dataset().n();
    let g = ev.config().g_theta;
    let nb = blocks.n_blocks();
    let start = 1.0 / (p as f64 + 1.0);
    let prior = ModelPrior::fixed(vec![start; p])?;
    let pip = match e_step {
        EStep::Exact { max_p } => enumerate_posterior(ev, &prior, *max_p)?.pip,
        EStep::Stochastic(gcfg) => run_chain(ev, &prior, gcfg)?.pip,
    };
    let pip_vec: Vec<f64> = pip.iter().copied().collect();
    let omega1 = DVector::from_vec(blocks.block_means(&pip_vec));
    let kappa0 = DVector::from_element(nb, kappa(start, g, n)?);
    let kappa1 = omega1.map(|w| boundary_kappa(w, g, n));
    Ok(TwoStepResult {
        omega0: DVector::from_element(nb, start),
        omega1,
        kappa0,
        kappa1,
        pip,
    })
}

fn boundary_kappa(omega_b: f64, g: f64, n: usize) -> f64 {
    if omega_b <= 0.0 {
        f64::INFINITY
    } else if omega_b >= 1.0 {
        f64::NEG_INFINITY
    } else {
        kappa(omega_b, g, n).expect("omega strictly inside (0,1)")
    }
}

/// Post-burn-in draws of the joint `(γ, ω)` sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGibbsResult {
    pub gammas: Vec<ModelIndicator>,
    pub omegas: Vec<DVector<f64>>,
    /// Fraction of accepted `ω` proposals over all iterations.
    pub acceptance_rate: f64,
    pub omega_mean: DVector<f64>,
    pub pip: DVector<f64>,
}

/// Random-walk Metropolis sampler for `ω` given `γ`, proposal
/// `N(ω, mh_step² V)`. Target `Π_j Bern(γ_j; m_j(ω)) · N(ω; 0, g_omega V)`.
pub struct OmegaKernel<'a> {
    meta: &'a MetaCovariates,
    hp: &'a HyperPrior,
    chol: DMatrix<f64>,
    step: f64,
}

impl<'a> OmegaKernel<'a> {
    pub fn new(meta: &'a MetaCovariates, hp: &'a HyperPrior, mh_step: f64) -> Result<Self> {
        if !(mh_step > 0.0 && mh_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("mh_step must be positive, got {mh_step}")));
        }
        if hp.q() != meta.q() {
            return Err(Error::DimensionMismatch("hyperprior and Z disagree on q".into()));
        }
        let chol = hp
            .v()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidHyper("V is not positive definite".into()))?
            .l();
        Ok(OmegaKernel {
            meta,
            hp,
            chol,
            step: mh_step,
        })
    }

    pub fn log_target(&self, gamma: &ModelIndicator, omega: &DVector<f64>) -> Result<f64> {
        let eta = self.meta.linear_predictor(omega)?;
        let lik: f64 = eta
            .iter()
            .enumerate()
            .map(|(j, &e)| if gamma.contains(j) { log_sigmoid(e) } else { log_sigmoid(-e) })
            .sum();
        Ok(lik + log_hyperprior_and_grad(omega, self.hp)?.0)
    }

    /// One Metropolis update; returns whether the proposal was accepted.
    pub fn step<R: Rng + ?Sized>(
        &self,
        gamma: &ModelIndicator,
        omega: &mut DVector<f64>,
        rng: &mut R,
    ) -> Result<bool> {
        let q = omega.len();
        let xi = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let proposal = &*omega + &self.chol * xi * self.step;
        let log_ratio = self.log_target(gamma, &proposal)? - self.log_target(gamma, omega)?;
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            *omega = proposal;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

/// Joint sampler over `(γ, ω)`: one Gibbs sweep over `γ` at the current `ω`,
/// then one Metropolis step on `ω` given `γ`. `ω̂` is the posterior mean.
pub fn block_gibbs_full<L: ModelLikelihood + ?Sized>(
    lik: &L,
    meta: &Arc<MetaCovariates>,
    hp: &HyperPrior,
    cfg: &GibbsConfig,
    mh_step: f64,
    omega_init: Option<&DVector<f64>>,
) -> Result<BlockGibbsResult> {
    cfg.validate()?;
    let p = lik.p();
    if meta.p() != p {
        return Err(Error::DimensionMismatch(format!("Z has {} rows, expected {p}", meta.p())));
    }
    let kernel = OmegaKernel::new(meta, hp, mh_step)?;
    let mut omega = match omega_init {
        Some(w) => {
            check_len("omega_init", w, meta.q())?;
            w.clone()
        }
        None => DVector::zeros(meta.q()),
    };
    let init = cfg.init.clone().unwrap_or_else(|| ModelIndicator::empty(p));
    let mut state = start_state(init, lik)?;
    let mut rng = stream_rng(cfg.seed, cfg.stream);

    let kept = cfg.n_sweeps - cfg.burn_in;
    let mut gammas = Vec::with_capacity(kept);
    let mut omegas = Vec::with_capacity(kept);
    let mut accepted = 0usize;
    let mut incl = vec![0usize; p];
    for it in 0..cfg.n_sweeps {
        let odds = ModelPrior::logistic(meta.clone(), omega.clone())?.coordinate_odds(p)?;
        sweep(&mut state, lik, &odds, &mut rng)?;
        if kernel.step(&state.gamma, &mut omega, &mut rng)? {
            accepted += 1;
        }
        if it >= cfg.burn_in {
            for j in state.gamma.indices() {
                incl[j] += 1;
            }
            gammas.push(state.gamma.clone());
            omegas.push(omega.clone());
        }
    }
    let denom = kept as f64;
    let omega_mean = omegas.iter().fold(DVector::zeros(meta.q()), |acc, w| acc + w) / denom;
    Ok(BlockGibbsResult {
        gammas,
        omegas,
        acceptance_rate: accepted as f64 / cfg.n_sweeps as f64,
        omega_mean,
        pip: DVector::from_iterator(p, incl.iter().map(|&c| c as f64 / denom)),
    })
}

/// Exact posterior at `ω`, a convenience for callers holding a model space.
pub fn posterior_at(space: &ModelSpace, meta: &Arc<MetaCovariates>, omega: &DVector<f64>) -> Result<ExactPosterior> {
    space.posterior(&ModelPrior::logistic(meta.clone(), omega.clone())?)
}
