use thiserror::Error;

/// Errors raised by the estimators, diagnostics and experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Mean of a beta vector is zero, so its dispersion is undefined.
    #[error("beta mean is zero; dispersion undefined")]
    ZeroMean,

    #[error("beta dispersion is zero; pointwise correlation undefined")]
    ZeroDispersion,

    /// The sample covariance has no positive eigenvalue.
    #[error("degenerate spectrum: leading eigenvalue is zero")]
    DegenerateSpectrum,

    #[error("no spectral gap: leading eigenvalue does not exceed the residual average")]
    NoGap,

    #[error("anchor vectors span the zero subspace")]
    EmptySpan,

    #[error("random anchor draw was rank deficient twice")]
    RankDeficient,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("degenerate shrinkage: {0}")]
    DegenerateShrinkage(&'static str),

    #[error("degenerate projection: target is orthogonal to span{{h, L}}")]
    DegenerateProjection,

    #[error("unit vector is orthogonal to q; minimum-variance weights undefined")]
    OrthogonalToQ,

    #[error("estimate h coincides with q up to sign")]
    HAtQ,

    #[error("true vector b coincides with q up to sign")]
    BAtQ,

    #[error("empty sample")]
    EmptySample,

    #[error("config error: {0}")]
    Config(String),

    #[error("{source_name}: {message}")]
    Data { source_name: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn data(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data { source_name: source_name.into(), message: message.into() }
    }

    /// True for errors caused by a malformed or inconsistent configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidParameter(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
