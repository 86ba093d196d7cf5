use nalgebra::{DMatrix, DVector};

use super::{Dataset, ModelIndicator};
use crate::error::{Error, Result};

/// Factor diagonals below this fraction of the largest one mark a model as
/// rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Least-squares fit of `y` on the columns selected by a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub gamma: ModelIndicator,
    pub n: usize,
    /// Coefficients in increasing covariate-index order.
    pub theta_hat: DVector<f64>,
    /// `yᵀ P_γ y`.
    pub fitted_sumsq: f64,
    pub residual_sumsq: f64,
}

impl FitResult {
    /// `θ̂` scattered into a length-`p` vector.
    pub fn embedded(&self, coefs: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.gamma.p());
        for (k, j) in self.gamma.indices().into_iter().enumerate() {
            out[j] = coefs[k];
        }
        out
    }
}

pub(crate) fn check_model(dataset: &Dataset, gamma: &ModelIndicator) -> Result<()> {
    if gamma.p() != dataset.p() {
        return Err(Error::DimensionMismatch(format!(
            "model defined over {} covariates, dataset has {}",
            gamma.p(),
            dataset.p()
        )));
    }
    Ok(())
}

/// Householder-QR least squares on `X_γ`.
///
/// Residuals are formed explicitly from `y − X_γθ̂` rather than by subtracting
/// the fitted sum of squares from `yᵀy`, so near-perfect fits keep their
/// relative accuracy.
pub fn least_squares_fit(dataset: &Dataset, gamma: &ModelIndicator) -> Result<FitResult> {
    check_model(dataset, gamma)?;
    let n = dataset.n();
    let y = dataset.y();
    let idx = gamma.indices();
    let k = idx.len();
    if k == 0 {
        let yty = y.dot(y);
        return Ok(FitResult {
            gamma: gamma.clone(),
            n,
            theta_hat: DVector::zeros(0),
            fitted_sumsq: 0.0,
            residual_sumsq: yty,
        });
    }
    if k > n {
        return Err(Error::RankDeficient(gamma.to_string()));
    }
    let xg = dataset.x().select_columns(&idx);
    let qr = xg.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| !(r[(i, i)].abs() > RANK_TOL * diag_max)) {
        return Err(Error::RankDeficient(gamma.to_string()));
    }
    let qty = qr.q().transpose() * y;
    let theta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(gamma.to_string()))?;
    let fitted = &xg * &theta;
    let resid = y - &fitted;
    Ok(FitResult {
        gamma: gamma.clone(),
        n,
        theta_hat: theta,
        fitted_sumsq: fitted.dot(&fitted),
        residual_sumsq: resid.dot(&resid),
    })
}

/// Cholesky factor of a Gram submatrix together with `z = L⁻¹ X_γᵀ y`.
///
/// This is the fast path used for marginal likelihoods: it only touches the
/// precomputed `XᵀX` and `Xᵀy`, so the cost is independent of `n`.
#[derive(Debug, Clone)]
pub(crate) struct GramFactor {
    k: usize,
    /// Row-major lower triangle, `k × k`.
    l: Vec<f64>,
    z: Vec<f64>,
}

impl GramFactor {
    /// Returns `None` when the submatrix fails the rank check.
    pub(crate) fn new(gram: &DMatrix<f64>, xty: &DVector<f64>, idx: &[usize]) -> Option<Self> {
        let k = idx.len();
        let mut l = vec![0.0; k * k];
        let mut diag_max: f64 = 0.0;
        for i in 0..k {
            for j in 0..=i {
                let mut s = gram[(idx[i], idx[j])];
                for m in 0..j {
                    s -= l[i * k + m] * l[j * k + m];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    let d = s.sqrt();
                    diag_max = diag_max.max(d);
                    l[i * k + i] = d;
                } else {
                    l[i * k + j] = s / l[j * k + j];
                }
            }
        }
        if (0..k).any(|i| !(l[i * k + i] > RANK_TOL * diag_max)) {
            return None;
        }
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut s = xty[idx[i]];
            for m in 0..i {
                s -= l[i * k + m] * z[m];
            }
            z[i] = s / l[i * k + i];
        }
        Some(GramFactor { k, l, z })
    }

    pub(crate) fn fitted_sumsq(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum()
    }

    /// Back-substitution `Lᵀθ = z`.
    pub(crate) fn theta(&self) -> DVector<f64> {
        let k = self.k;
        let mut theta = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = self.z[i];
            for m in i + 1..k {
                s -= self.l[m * k + i] * theta[m];
            }
            theta[i] = s / self.l[i * k + i];
        }
        DVector::from_vec(theta)
    }
}
