use thiserror::Error;

#[derive(Debug, Error)]
pub enum QueError {
    #[error("level {level} exceeds the maximum level {max} for the {model} model")]
    ResourceLimit {
        model: &'static str,
        level: usize,
        max: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("analytic reference eigenvalues are only available for the interval model")]
    UnsupportedReference,

    #[error("degenerate eigenvalue cluster: {0}")]
    DegenerateCluster(String),

    #[error("ill-conditioned spectral window: {0}")]
    IllConditionedWindow(String),

    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, QueError>;
