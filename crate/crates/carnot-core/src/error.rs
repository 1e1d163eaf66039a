//! Crate-wide error type.

/// Errors raised by algebra construction, discretization and the
/// numerical estimators.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Jacobi identity violated for basis triple ({i},{j},{k}): residual {residual:.3e}")]
    JacobiViolation {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },

    #[error("grading violated: c[{i}][{j}][{k}]={value} maps layers {wi}+{wj} outside layer {wk}")]
    GradingViolation {
        i: usize,
        j: usize,
        k: usize,
        value: f64,
        wi: usize,
        wj: usize,
        wk: usize,
    },

    #[error("lattice budget exceeded: {nodes} nodes > {budget}")]
    BudgetExceeded { nodes: usize, budget: usize },

    #[error("step {step} needs user-supplied vector-field coefficients")]
    UnsupportedStep { step: usize },

    #[error("operator is not positive semidefinite: eigenvalue {0:.6e}")]
    NegativeEigenvalue(f64),

    #[error("non-finite sample at node {index}: {context}")]
    NonFiniteSample { index: usize, context: String },

    #[error("singular at the group identity: {0}")]
    OriginSingular(String),

    #[error("{what} = {value} out of range {range}")]
    OutOfRange {
        what: String,
        value: f64,
        range: String,
    },

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("factorization failure: {0}")]
    FactorizationFailure(String),

    #[error("pencil is numerically singular: {0}")]
    PencilSingular(String),

    #[error("linear solve failure: {0}")]
    SolveFailure(String),

    #[error("trial vector violates support preconditions: {0}")]
    SupportViolation(String),

    #[error("eigenvalue matching ambiguous: {0}")]
    MatchingAmbiguous(String),

    #[error("rate premise violated: {0}")]
    RateViolation(String),

    #[error("missing constant: {0}")]
    MissingConstant(String),

    #[error("parse error{}: {msg}", position.map(|(l, c)| format!(" at {l}:{c}")).unwrap_or_default())]
    ParseError {
        position: Option<(usize, usize)>,
        msg: String,
    },

    #[error("invalid configuration:\n{}", violations.join("\n"))]
    ValidationError { violations: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::ParseError {
            position: None,
            msg: msg.into(),
        }
    }

    pub fn parse_at(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::ParseError {
            position: Some((line, col)),
            msg: msg.into(),
        }
    }
}
