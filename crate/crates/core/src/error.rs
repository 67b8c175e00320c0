use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the estimators, preprocessing and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge within {iterations} iterations")]
    FailedConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("leading eigenvalue is not simple (relative gap {gap:.3e})")]
    Multiplicity { gap: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("fixed-point update vanished (norm {0:.3e})")]
    ZeroUpdate(f64),

    #[error("dimension {0} is not supported by the grid search (p must be at most 3)")]
    UnsupportedDimension(usize),

    #[error("influence matrix A is singular (condition number {0:.3e})")]
    SingularA(f64),

    #[error("Fisher information matrix is singular")]
    SingularFisher,

    #[error("column {0} has zero scale")]
    ZeroScale(usize),

    #[error("{failed} of {total} replications failed (more than 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Stable numeric codes, shared with the C ABI.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    InvalidInput = 1,
    FailedConvergence = 2,
    ZeroVariance = 3,
    Multiplicity = 4,
    DegenerateSample = 5,
    ZeroUpdate = 6,
    UnsupportedDimension = 7,
    SingularA = 8,
    SingularFisher = 9,
    ZeroScale = 10,
    TooManyFailures = 11,
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::InvalidInput(_) => ErrorCode::InvalidInput,
            Error::FailedConvergence { .. } => ErrorCode::FailedConvergence,
            Error::ZeroVariance => ErrorCode::ZeroVariance,
            Error::Multiplicity { .. } => ErrorCode::Multiplicity,
            Error::DegenerateSample(_) => ErrorCode::DegenerateSample,
            Error::ZeroUpdate(_) => ErrorCode::ZeroUpdate,
            Error::UnsupportedDimension(_) => ErrorCode::UnsupportedDimension,
            Error::SingularA(_) => ErrorCode::SingularA,
            Error::SingularFisher => ErrorCode::SingularFisher,
            Error::ZeroScale(_) => ErrorCode::ZeroScale,
            Error::TooManyFailures { .. } => ErrorCode::TooManyFailures,
            Error::Component { source, .. } => source.code(),
        }
    }

    /// True for validation failures (bad shapes, bad parameters), false for
    /// failures that happen during the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.code(),
            ErrorCode::InvalidInput | ErrorCode::UnsupportedDimension
        )
    }

    pub(crate) fn in_component(self, index: usize) -> Error {
        Error::Component {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Error {
        Error::InvalidInput(msg.into())
    }
}
