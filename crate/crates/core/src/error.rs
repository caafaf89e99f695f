use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index out of range: {index} (p = {p})")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("support matrix is not graph-representable: diagonal cell {0} is zero")]
    NotGraphRepresentable(usize),

    #[error("graph is not acyclic")]
    NotAcyclic,

    #[error("vertex sequence is not a directed cycle of the graph")]
    NotACycle,

    #[error("vertices {0} and {1} are not parent-exchangeable")]
    NotExchangeable(usize, usize),

    #[error("vertices {0} and {1} are not parent-reducible")]
    NotReducible(usize, usize),

    #[error("illegal target edge: {0}")]
    IllegalTarget(String),

    #[error("I - B is numerically singular")]
    SingularSystem,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("stable parameters not found after {0} rejections")]
    StabilityRejectionLimit(usize),

    #[error("no graph satisfies the constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("every converged optimum is unstable")]
    UnstableOptimum,

    #[error("move precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in JSON error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::NotGraphRepresentable(_) => "not_graph_representable",
            Error::NotAcyclic => "not_acyclic",
            Error::NotACycle => "not_a_cycle",
            Error::NotExchangeable(..) => "not_exchangeable",
            Error::NotReducible(..) => "not_reducible",
            Error::IllegalTarget(_) => "illegal_target",
            Error::SingularSystem => "singular_system",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::StabilityRejectionLimit(_) => "stability_rejection_limit",
            Error::InfeasibleConstraints(_) => "infeasible_constraints",
            Error::OptimizationFailed(_) => "optimization_failed",
            Error::UnstableOptimum => "unstable_optimum",
            Error::PreconditionViolated(_) => "precondition_violated",
            Error::InvalidParameters(_) => "invalid_parameters",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
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
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
