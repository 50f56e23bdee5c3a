use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("grid must have at least one point and one coordinate")]
    EmptyGrid,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("tolerance must lie strictly between 0 and 1, got {0}")]
    InvalidTolerance(f64),
    #[error("dictionary spans a trivial subspace (largest singular value is zero)")]
    TrivialSubspace,
    #[error("dictionary size {n} exceeds grid size {k}")]
    DictionaryTooLarge { n: usize, k: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("sample count must be positive")]
    EmptyDraw,
    #[error("weights must be strictly positive and finite")]
    NonPositiveWeight,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },
    #[error("target has zero norm on the test set")]
    ZeroNormTarget,
    #[error("config error: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("table error: {0}")]
    Tabulated(String),
    #[error("results table error: {0}")]
    Csv(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
