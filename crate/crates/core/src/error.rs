use thiserror::Error;

/// Errors surfaced by kernel verification, quadrature, test-function
/// construction and the definitional checkers.
#[derive(Debug, Error)]
pub enum Error {
    /// A moment or jump integral fails the Cauchy criterion over the graded
    /// mesh, or the singularity order makes it divergent outright.
    #[error("divergent moment: {0}")]
    DivergentMoment(String),

    #[error("unsupported dimension {0} (deterministic quadrature covers N <= 3)")]
    UnsupportedDimension(usize),

    #[error("function not smooth enough: {0}")]
    NotSmooth(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("point outside domain: {0}")]
    OutOfDomain(String),

    /// No dyadic scale on the search grid satisfies the touching conditions.
    #[error("no valid scale: {0}")]
    NoValidScale(String),

    /// The exterior envelope dipped below the candidate; reported, never
    /// silently clipped.
    #[error("extension failure: {0}")]
    ExtensionFailure(String),

    #[error("jet certificate rejected: {0}")]
    JetRejected(String),

    #[error("global max/min violated: {0}")]
    MaxViolated(String),

    #[error("test-function certificate failed: {0}")]
    PhiCertificateFailed(String),

    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),

    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
