use std::fmt;

use crate::error::{Error, Result};

/// A subset of covariates `{0..p}` stored as a bitset.
///
/// Ordering and hashing go through the packed words, so the same set always
/// produces the same key regardless of how it was built.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelIndicator {
    p: usize,
    words: Vec<u64>,
}

impl ModelIndicator {
    pub fn empty(p: usize) -> Self {
        ModelIndicator {
            p,
            words: vec![0; p.div_ceil(64)],
        }
    }

    pub fn full(p: usize) -> Self {
        let mut m = Self::empty(p);
        for j in 0..p {
            m.insert(j);
        }
        m
    }

    /// Builds a model from 0-based covariate indices. Duplicates are rejected.
    pub fn from_indices(p: usize, indices: &[usize]) -> Result<Self> {
        let mut m = Self::empty(p);
        for &j in indices {
            if j >= p {
                return Err(Error::DimensionMismatch(format!(
                    "covariate index {j} out of range for p = {p}"
                )));
            }
            if m.contains(j) {
                return Err(Error::DimensionMismatch(format!(
                    "covariate index {j} listed twice"
                )));
            }
            m.insert(j);
        }
        Ok(m)
    }

    /// Model whose covariate `j` is included iff bit `j` of `mask` is set.
    pub fn from_mask(p: usize, mask: u64) -> Self {
        assert!(p <= 64, "mask form only covers p <= 64");
        let mut m = Self::empty(p);
        if p > 0 {
            let keep = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
            m.words[0] = mask & keep;
        }
        m
    }

    pub fn from_bools(included: &[bool]) -> Self {
        let mut m = Self::empty(included.len());
        for (j, &b) in included.iter().enumerate() {
            if b {
                m.insert(j);
            }
        }
        m
    }

    /// Parses the `model_bits` form written by [`ModelIndicator::to_bit_string`].
    pub fn from_bit_string(s: &str) -> Result<Self> {
        let mut m = Self::empty(s.len());
        for (j, c) in s.chars().enumerate() {
            match c {
                '1' => m.insert(j),
                '0' => {}
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "model bit string contains '{other}'"
                    )))
                }
            }
        }
        Ok(m)
    }

    /// One character per covariate, covariate 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.p)
            .map(|j| if self.contains(j) { '1' } else { '0' })
            .collect()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn size(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        debug_assert!(j < self.p);
        (self.words[j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, j: usize) {
        assert!(j < self.p, "covariate index {j} out of range");
        self.words[j / 64] |= 1 << (j % 64);
    }

    #[inline]
    pub fn remove(&mut self, j: usize) {
        assert!(j < self.p, "covariate index {j} out of range");
        self.words[j / 64] &= !(1 << (j % 64));
    }

    #[inline]
    pub fn set(&mut self, j: usize, included: bool) {
        if included {
            self.insert(j)
        } else {
            self.remove(j)
        }
    }

    pub fn with(&self, j: usize) -> Self {
        let mut m = self.clone();
        m.insert(j);
        m
    }

    pub fn without(&self, j: usize) -> Self {
        let mut m = self.clone();
        m.remove(j);
        m
    }

    /// Included indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size());
        for (w, &word) in self.words.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let tz = bits.trailing_zeros() as usize;
                out.push(w * 64 + tz);
                bits &= bits - 1;
            }
        }
        out
    }

    pub fn is_superset_of(&self, other: &ModelIndicator) -> bool {
        self.p == other.p
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & b == *b)
    }

    /// Indices in `self` that are not in `other`.
    pub fn difference(&self, other: &ModelIndicator) -> Vec<usize> {
        self.indices()
            .into_iter()
            .filter(|&j| j >= other.p || !other.contains(j))
            .collect()
    }
}

impl fmt::Debug for ModelIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelIndicator({:?})", self.indices())
    }
}

impl fmt::Display for ModelIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, j) in self.indices().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str("}")
    }
}
