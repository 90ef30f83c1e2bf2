use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator has no nonzero coefficient matrix")]
    OperatorIsZero,
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
    #[error("right-hand-side augmentation needs an operator of order at least 1")]
    UnsupportedOrderZero,
    #[error("frequency vector has zero norm")]
    DegenerateFrequency,
    #[error("query vector has zero norm")]
    DegenerateVector,
    #[error("degree overflow: {p} + {q} exceeds ambient dimension {d}")]
    DegreeOverflow { p: usize, q: usize, d: usize },
    #[error("interior product or boundary of a 0-vector")]
    DegreeUnderflow,
    #[error("empty family of k-vectors")]
    EmptyFamily,
    #[error("empty measure: {0}")]
    EmptyMeasure(String),
    #[error("Bessel exponent must be positive, got {0}")]
    InvalidExponent(f64),
    #[error("P0 lies in the wave cone (residual {residual:.3e}); the regularization scenario needs P0 outside it")]
    ScenarioContradictsHypothesis { residual: f64 },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionError(msg.into())
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
