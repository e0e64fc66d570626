use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown subsystem label `{0}`")]
    UnknownSubsystem(String),
    #[error("duplicate subsystem label `{0}`")]
    DuplicateSubsystem(String),
    #[error("subsystem `{0}` has zero dimension")]
    ZeroDimension(String),
    #[error("total dimension {dim} exceeds cap {cap} (set SYMREC_DIM_CAP to override)")]
    DimensionCap { dim: usize, cap: usize },
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("state is not normalized (trace deviates by {0:.3e})")]
    NotNormalized(f64),
    #[error("map is not an isometry (max deviation {0:.3e})")]
    NotIsometry(f64),
    #[error("map is not trace preserving (max deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("decomposition does not reproduce the state (max deviation {0:.3e})")]
    BadDecomposition(f64),
    #[error("trivial regime: {0}")]
    TrivialRegime(String),
    #[error("undefined quantity: {0}")]
    Undefined(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
