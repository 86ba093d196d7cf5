//! Gaussian linear regression under Zellner's coefficient prior.

mod cache;
mod dataset;
mod fit;
mod model;
mod zellner;

pub use cache::{LogMarginalCache, MarginalEvaluator, ModelLikelihood, DEFAULT_CACHE_CAPACITY};
pub use dataset::{Dataset, Standardization};
pub use fit::{least_squares_fit, FitResult, RANK_TOL};
pub use model::ModelIndicator;
pub use zellner::{
    bma_point_estimate, log_marginal_from_fit, log_marginal_known_var, log_marginal_unknown_var,
    posterior_shrinkage_mean, VarianceMode, ZellnerConfig,
};
