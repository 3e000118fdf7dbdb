use thiserror::Error;

/// Everything that can go wrong, from a kernel weight to a CSV cell.
#[derive(Debug, Error)]
pub enum Error {
    /// Kernel mass around the requested state is below the configured floor.
    #[error("effective sample {effective:.4} at state {state} is below the floor {floor}")]
    EffectiveSampleTooSmall { state: f64, effective: f64, floor: f64 },

    /// The eigensolver did not reach tolerance.
    #[error("eigensolver did not converge")]
    NotConverged,

    /// One of the leading r eigenvalues is zero or negative.
    #[error("eigenvalue {index} is not positive ({value})")]
    SingularEigenvalue { index: usize, value: f64 },

    /// The loading Gram matrix cannot be inverted.
    #[error("loading Gram matrix is singular")]
    SingularLoadingGram,

    /// A loading matrix passed to the correlation does not have full column rank.
    #[error("loading matrix is rank deficient (condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    /// The variance of the change statistic is zero, typically a noiseless panel.
    #[error("estimated variance of the statistic is zero")]
    ZeroVariance,

    /// The sample covariance of factor returns cannot be inverted even after the ridge.
    #[error("factor covariance is singular")]
    SingularFactorCov,

    /// Shapes of inputs do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A state transform divides by a zero standard deviation.
    #[error("zero denominator in state transform")]
    ZeroDenominator,

    /// Caller supplied an argument outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing cell at row {row}, column {column}")]
    MissingCell { row: usize, column: usize },

    #[error("cannot parse '{text}' at row {row}, column {column}")]
    ParseError { row: usize, column: usize, text: String },

    /// State series does not line up with the time axis of the panel.
    #[error("state series is misaligned: {0}")]
    MisalignedState(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: usize },

    #[error("malformed configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EffectiveSampleTooSmall { .. } => "EffectiveSampleTooSmall",
            Error::NotConverged => "NotConverged",
            Error::SingularEigenvalue { .. } => "SingularEigenvalue",
            Error::SingularLoadingGram => "SingularLoadingGram",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::ZeroVariance => "ZeroVariance",
            Error::SingularFactorCov => "SingularFactorCov",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::ZeroDenominator => "ZeroDenominator",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::MissingCell { .. } => "MissingCell",
            Error::ParseError { .. } => "ParseError",
            Error::MisalignedState(_) => "MisalignedState",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::MissingCell { .. }
            | Error::ParseError { .. }
            | Error::MisalignedState(_)
            | Error::NonFiniteValue { .. }
            | Error::DimensionMismatch(_)
            | Error::ZeroDenominator
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
