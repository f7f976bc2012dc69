use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("singular design matrix (reciprocal condition number {rcond:.3e})")]
    SingularDesign { rcond: f64 },

    #[error("logistic fit diverged: {0}")]
    Separation(String),

    #[error("no convergence after {iterations} iterations (max |score| = {max_score:.3e})")]
    NonConvergence { iterations: usize, max_score: f64 },

    #[error("covariance singular: {0}")]
    CovarianceSingular(String),

    #[error("insufficient sample: n = {n} must exceed m = {m}")]
    InsufficientSample { n: usize, m: usize },

    #[error("infinite effect size: R^2 = 1")]
    InfiniteEffect,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerics on otherwise valid input
    /// (singularity, divergence), as opposed to invalid requests.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign { .. }
                | Error::Separation(_)
                | Error::NonConvergence { .. }
                | Error::CovarianceSingular(_)
                | Error::DegenerateDesign(_)
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
