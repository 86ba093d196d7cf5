use metabvs::Error as ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("malformed CSV {path}: {message}")]
    Malformed { path: String, message: String },

    #[error("{0}")]
    Dimension(String),

    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },

    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CliError {
    /// Bad input or flags give 2. Inconsistent or unusable data give 3.
    /// Numerical failures inside the fit give 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Malformed { .. } => 2,
            CliError::Dimension(_) => 3,
            CliError::Output { .. } => 1,
            CliError::Model(e) => match e {
                ModelError::InvalidConfig(_) | ModelError::InvalidHyper(_) | ModelError::NonPositiveVariance(_) => 2,
                ModelError::DimensionMismatch(_)
                | ModelError::TooLarge { .. }
                | ModelError::ConstantColumn(_)
                | ModelError::DegenerateVariance
                | ModelError::RankDeficientZ
                | ModelError::NotBlockStructured(_) => 3,
                _ => 4,
            },
        }
    }
}
