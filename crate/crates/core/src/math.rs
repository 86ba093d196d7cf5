//! Small scalar helpers shared across modules.

/// Linear predictors are clamped to this magnitude before the logistic map.
pub const ETA_CLAMP: f64 = 35.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Inverse of a symmetric positive-definite matrix, or `None` if its Cholesky
/// factor has a diagonal below `1e-10` times the largest one.
pub fn spd_inverse(m: &nalgebra::DMatrix<f64>) -> Option<nalgebra::DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..m.nrows()).map(|i| l[(i, i)]).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| !(d > 1e-10 * max)) {
        return None;
    }
    Some(chol.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_finite() {
        for &x in &[-800.0, -35.0, -1.0, 0.0, 2.5, 35.0, 800.0] {
            let s = sigmoid(x);
            assert!(s.is_finite());
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
            assert!((log_sigmoid(x) - s.ln()).abs() < 1e-12 || s == 0.0);
        }
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(ETA_CLAMP) < 1.0 && sigmoid(-ETA_CLAMP) > 0.0);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - 1000.0 - 2f64.ln()).abs() < 1e-12);
        assert!((logit(0.9) - 9f64.ln()).abs() < 1e-15);
    }
}
