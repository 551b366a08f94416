use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivative of order {requested} requested, performance function is only C^{max}")]
    UnsupportedDerivativeOrder { requested: usize, max: usize },

    #[error("{what}: argument {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("funnel violated: |{level}| >= bound {bound} at x = {x}")]
    FunnelViolation { x: f64, level: f64, bound: f64 },

    #[error("division by a quantity whose value is zero")]
    DivisionByZero,

    #[error("unknown seed {0}")]
    UnknownSeed(String),

    #[error("seed {0} registered twice")]
    DuplicateSeed(String),

    #[error("unsupported function `{0}`")]
    UnsupportedFunction(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error(
        "factorization residual {residual:.3e} exceeds tolerance {tolerance:.3e} \
         after {nodes}-node quadrature"
    )]
    Factorization {
        residual: f64,
        tolerance: f64,
        nodes: usize,
    },

    #[error("derivative nesting depth exhausted; system order is too high")]
    DerivativeDepth,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("invalid Lyapunov oracle: {0}")]
    InvalidOracle(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
