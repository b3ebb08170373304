use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("operator is not Hermitian (max asymmetry {max_asymmetry:.3e})")]
    NonHermitian { max_asymmetry: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("primitive has no support on the {sector} sector of the order-{order} Fock grid")]
    MissingSector { sector: &'static str, order: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fock cutoff {dim} cannot reach tail tolerance {tail_tol:e} (tail {tail:e})")]
    TailUnreachable { dim: usize, tail_tol: f64, tail: f64 },

    #[error("Kraus cutoff search exhausted: achieved completeness defect {achieved:e}")]
    CutoffExceeded { achieved: f64 },

    #[error("degenerate normalization ({0:e})")]
    DegenerateNormalization(f64),

    #[error("degenerate breeding: P+ = {0:e}")]
    DegenerateBreeding(f64),

    #[error("unsupported gate for this operation: {0}")]
    UnsupportedGate(String),

    #[error("outcome probability {0:e} below threshold")]
    ProbabilityTooSmall(f64),

    #[error("POVM completeness defect {0:e} above tolerance")]
    PovmIncomplete(f64),

    #[error("assembled process is not completely positive (min Choi eigenvalue {0:e})")]
    NotCompletelyPositive(f64),

    #[error("no sign change of the break-even function in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("dimension {dim} exceeds the limit {limit}")]
    DimTooLarge { dim: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
