use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "matrix is not positive definite after ridge {ridge:e} \
         (pivot {pivot} at index {index}, smallest eigenvalue estimate {min_eigenvalue:e})"
    )]
    NotPositiveDefinite {
        index: usize,
        pivot: f64,
        ridge: f64,
        min_eigenvalue: f64,
    },

    #[error("ROC needs both classes; got {negatives} negatives and {positives} positives")]
    SingleClass { negatives: usize, positives: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical kind (factorisation) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } => true,
            Error::Round { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
