use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the admissible set (negative α, λ outside (−r, r), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method or quadrature failed to reach its tolerance.
    #[error("divergence: {context} (achieved {achieved:.3e})")]
    Divergence { context: String, achieved: f64 },

    /// A structural condition (e.g. j_i = β_i ρ_i) does not hold.
    #[error("constraint violated: {context} (worst residual {residual:.3e})")]
    Constraint { context: String, residual: f64 },

    /// A linear system is singular or too badly conditioned to trust.
    #[error("conditioning: {0}")]
    Conditioning(String),

    #[error("lookup: {0}")]
    Lookup(String),

    /// A formula hits a vanishing denominator.
    #[error("singularity: {0}")]
    Singularity(String),

    #[error("degenerate eigenvalues: {0}")]
    Degeneracy(String),

    /// An input that was expected to be prepared (converged, kernel attached) was not.
    #[error("invalid state: {0}")]
    State(String),

    #[error("ambiguous branching order: fitted slope {slope:.3}")]
    OrderAmbiguity { slope: f64 },

    #[error("consistency: {0}")]
    Consistency(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn divergence(context: impl Into<String>, achieved: f64) -> Self {
        Error::Divergence {
            context: context.into(),
            achieved,
        }
    }
}
