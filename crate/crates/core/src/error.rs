use thiserror::Error;

use crate::otm::FixedPointResult;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative entry {value} at {location}")]
    NegativeEntry { location: String, value: f64 },

    #[error("row {row} sums to {sum} (deviation exceeds {tolerance})")]
    RowSumViolation {
        row: usize,
        sum: f64,
        tolerance: f64,
    },

    #[error("marginal does not sum to 1 (sum = {0})")]
    MarginalNotNormalized(f64),

    #[error("cost matrix has a non-finite entry at ({0}, {1})")]
    NonFiniteCost(usize, usize),

    #[error("chains carry no labels")]
    MissingLabels,

    #[error("label dimension mismatch: {0} vs {1}")]
    LabelDimensionMismatch(usize, usize),

    #[error(
        "stationary distribution is not unique (reducible chain); supply an initial distribution"
    )]
    NonUniqueStationary,

    #[error("stationary initial distribution unavailable: {0}")]
    StationaryUnavailable(Box<Error>),

    #[error("mass outside the declared support at index {0}")]
    SupportViolation(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("initial distribution is not stationary (balance residual {0:.3e})")]
    NotStationary(f64),

    #[error(
        "fixed point did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        partial: Option<Box<FixedPointResult>>,
    },

    #[error("gradients are undefined for the exact (epsilon = 0) path")]
    EpsilonZero,

    #[error("solution comes from the exact path; entropic duals required")]
    ExactPathUnsupported,

    #[error("invalid coupling policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid horizon distribution: {0}")]
    InvalidHorizon(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::RowSumViolation { .. } => "RowSumViolation",
            Error::MarginalNotNormalized(_) => "MarginalNotNormalized",
            Error::NonFiniteCost(..) => "NonFiniteCost",
            Error::MissingLabels => "MissingLabels",
            Error::LabelDimensionMismatch(..) => "LabelDimensionMismatch",
            Error::NonUniqueStationary => "NonUniqueStationary",
            Error::StationaryUnavailable(_) => "StationaryUnavailable",
            Error::SupportViolation(_) => "SupportViolation",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::NotStationary(_) => "NotStationary",
            Error::NotConverged { .. } => "NotConverged",
            Error::EpsilonZero => "EpsilonZero",
            Error::ExactPathUnsupported => "ExactPathUnsupported",
            Error::InvalidPolicy(_) => "InvalidPolicy",
            Error::InvalidHorizon(_) => "InvalidHorizon",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
