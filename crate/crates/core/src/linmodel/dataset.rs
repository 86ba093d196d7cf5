use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Response vector and design matrix for a Gaussian linear regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    standardized: bool,
}

/// Column centers and scales applied by [`Dataset::standardize`], kept so that
/// new rows can be mapped onto the same scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.is_empty() || x.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "need n >= 1 and p >= 1, got n = {}, p = {}",
                y.len(),
                x.ncols()
            )));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "y has {} entries but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        Ok(Dataset {
            y,
            x,
            standardized: false,
        })
    }

    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged design rows".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(DVector::from_vec(y), x)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Centers every column of `X` and scales it to unit sample variance
    /// (divisor `n - 1`). Constant columns are rejected.
    pub fn standardize(self) -> Result<(Self, Standardization)> {
        let n = self.n();
        if n < 2 {
            return Err(Error::DimensionMismatch(
                "standardization needs at least two rows".into(),
            ));
        }
        let mut x = self.x;
        let mut means = Vec::with_capacity(x.ncols());
        let mut sds = Vec::with_capacity(x.ncols());
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let mean = col.mean();
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            if !(sd > 1e-12 * (1.0 + mean.abs())) {
                return Err(Error::ConstantColumn(j));
            }
            col.apply(|v| *v = (*v - mean) / sd);
            means.push(mean);
            sds.push(sd);
        }
        Ok((
            Dataset {
                y: self.y,
                x,
                standardized: true,
            },
            Standardization { means, sds },
        ))
    }

    /// Copy with the response replaced.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        let mut d = Self::new(y, self.x.clone())?;
        d.standardized = self.standardized;
        Ok(d)
    }

    /// Copy with row `i` removed.
    pub fn without_row(&self, i: usize) -> Self {
        Dataset {
            y: self.y.clone().remove_row(i),
            x: self.x.clone().remove_row(i),
            standardized: false,
        }
    }

    /// Copy with the columns reordered so that new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let x = DMatrix::from_fn(self.n(), self.p(), |i, k| self.x[(i, perm[k])]);
        Dataset {
            y: self.y.clone(),
            x,
            standardized: self.standardized,
        }
    }
}
