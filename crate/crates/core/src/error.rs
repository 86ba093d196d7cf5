use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("design restricted to model {0} is rank deficient")]
    RankDeficient(String),

    #[error("error variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),

    #[error("model weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),

    #[error("beta-binomial model prior does not factorize over covariates")]
    NotFactorizable,

    #[error("value {0} outside the domain of the function")]
    DomainError(f64),

    #[error("meta-covariate matrix is rank deficient")]
    RankDeficientZ,

    #[error("no convergence after {iters} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iters: usize, grad_norm: f64 },

    #[error("meta-covariates are not block structured: {0}")]
    NotBlockStructured(String),

    #[error("problem too large: p = {p} exceeds limit {max}")]
    TooLarge { p: usize, max: usize },

    #[error("predictions have zero variance")]
    DegenerateVariance,

    #[error("column {0} of the design is constant and cannot be standardized")]
    ConstantColumn(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
