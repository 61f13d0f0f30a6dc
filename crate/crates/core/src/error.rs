use thiserror::Error;

/// Errors raised anywhere in the inversion / bound pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series index {index} out of range (|j| <= {max})")]
    IndexOutOfRange { index: i64, max: usize },

    #[error("i/o: {0}")]
    Io(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver failed to converge ({0})")]
    NoConvergence(&'static str),

    #[error("no spectral gap: detected rank {k_hat} of {n} (threshold {threshold:e})")]
    NoSpectralGap {
        k_hat: usize,
        n: usize,
        threshold: f64,
    },

    #[error("non-positive eigenvalue {value:e} at position {index} of the retained subspace")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("rank-deficient amplitude design: {0}")]
    RankDeficient(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
