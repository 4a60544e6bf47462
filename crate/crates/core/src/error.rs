use thiserror::Error;

/// Errors raised by the emulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("matrix is not positive definite at any jitter level (last tried {0:e})")]
    NotPositiveDefinite(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel parameters must be strictly positive and finite")]
    NonPositiveParams,
    #[error("trend basis is degenerate (F'K^-1F = {0:e})")]
    DegenerateTrend(f64),
    #[error("at least {needed} training points are required, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("duplicate training input at row {row} (duplicates row {first})")]
    DuplicatePoints { first: usize, row: usize },
    #[error("input at row {row} lies outside the unit hypercube")]
    OutsideUnitCube { row: usize },
    #[error("likelihood optimisation failed: every start produced a non-finite objective")]
    OptimizerFailure,
    #[error("level {level} ({kernel}): {source}")]
    LevelFit {
        level: usize,
        kernel: String,
        #[source]
        source: Box<Error>,
    },
    #[error("every chain in the ensemble failed to fit")]
    AllChainsFailed,
    #[error("non-finite log-likelihood in BMA weighting")]
    NonFiniteLikelihood,
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("fidelity level {level} outside 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("simulator failed at level {level}: {message}")]
    SimulatorFailure { level: usize, message: String },
    #[error("point outside the benchmark domain [0,1]^d")]
    DomainViolation,
    #[error("invalid design sizes: {0}")]
    InvalidSizes(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("serialization: {0}")]
    Serialization(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at_level(self, level: usize, kernel: &str) -> Self {
        Error::LevelFit {
            level,
            kernel: kernel.to_string(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::MalformedCsv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
