use thiserror::Error;

/// Errors raised while assembling, solving or verifying a performance
/// estimation problem.
#[derive(Debug, Error)]
pub enum PepError {
    #[error("layout is frozen; cannot introduce {0}")]
    LayoutFrozen(String),

    #[error("duplicate evaluation label `{0}`")]
    DuplicateLabel(String),

    #[error("an optimum evaluation already exists")]
    DuplicateOptimum,

    #[error("no optimum evaluation has been declared")]
    MissingOptimum,

    #[error("evaluation set is empty")]
    EmptyEvaluationSet,

    #[error("invalid function class: {0}")]
    InvalidClass(String),

    #[error("invalid spectral range [{lam_minus}, {lam_plus}]: need -1 < lam_minus <= lam_plus < 1")]
    InvalidSpectralRange { lam_minus: f64, lam_plus: f64 },

    #[error("matrix class {0} has no registered consensus steps")]
    EmptyMatrixClass(usize),

    #[error("no scalar consensus value supplied for matrix class {0}")]
    MissingScalar(usize),

    #[error("criterion incompatible with method trace: {0}")]
    CriterionMismatch(String),

    #[error("matrix expression `{0}` is not structurally symmetric")]
    NonSymmetric(String),

    #[error("invalid method trace: {0}")]
    InvalidTrace(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver does not support {0}")]
    Unsupported(String),

    #[error("problem reported infeasible by the solver ({0})")]
    Infeasible(String),

    #[error("problem reported unbounded by the solver ({0})")]
    Unbounded(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("reconstruction residual {residual:.3e} exceeds limit {limit:.3e} (worst: {worst})")]
    ReconstructionFailed {
        residual: f64,
        limit: f64,
        worst: String,
    },

    #[error("simulation diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PepError>;
