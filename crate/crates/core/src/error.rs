use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: selection indicator (selected = {selected}) disagrees with target presence (present = {has_target})")]
    MissingTargetOnSelected {
        row: usize,
        selected: bool,
        has_target: bool,
    },
    #[error("row {row}: indicator {column} must be 0 or 1, found {value}")]
    NonBinaryIndicator {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: String },
    #[error("prediction column `{0}` is not a selection column")]
    NotASubset(String),
    #[error("target of row {0} is masked (unselected)")]
    MaskedTarget(usize),

    #[error("selection indicator has a single class; the probit likelihood has no finite maximizer")]
    SingleClass,
    #[error("probit did not converge within {iterations} iterations (gradient sup-norm {grad_norm:e})")]
    Diverged { iterations: usize, grad_norm: f64 },
    #[error("model was not converged")]
    NotConverged,
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("design matrix is rank deficient (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("group a = {0} is empty")]
    EmptyGroup(u8),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("partial correlation undefined: |corr({0})| = 1")]
    DegenerateConditioning(&'static str),

    #[error("no sign change of the MSED residual on [{lo}, {hi}] (psi = {psi_lo:e}, {psi_hi:e})")]
    NoBracket {
        lo: f64,
        hi: f64,
        psi_lo: f64,
        psi_hi: f64,
    },
    #[error("constrained normal matrix is singular at lambda = {0}")]
    SingularAtLambda(f64),
    #[error("inner Lagrangian minimization is not positive definite at the starting multipliers")]
    IndefiniteInner,
    #[error("dual ascent did not converge after {iterations} iterations (residual {residual:e})")]
    DualNotConverged {
        iterations: usize,
        residual: f64,
        trace: Box<crate::solvers::DualTrace>,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("split `{0}` is empty")]
    EmptySplit(&'static str),
    #[error("ratio {ratio} is infeasible: {reason}")]
    InfeasibleRatio { ratio: f64, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::MissingTargetOnSelected { .. } => "MissingTargetOnSelected",
            Error::NonBinaryIndicator { .. } => "NonBinaryIndicator",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::NotASubset(_) => "NotASubset",
            Error::MaskedTarget(_) => "MaskedTarget",
            Error::SingleClass => "SingleClass",
            Error::Diverged { .. } => "Diverged",
            Error::NotConverged => "NotConverged",
            Error::LayoutMismatch(_) => "LayoutMismatch",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::EmptyGroup(_) => "EmptyGroup",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::DegenerateConditioning(_) => "DegenerateConditioning",
            Error::NoBracket { .. } => "NoBracket",
            Error::SingularAtLambda(_) => "SingularAtLambda",
            Error::IndefiniteInner => "IndefiniteInner",
            Error::DualNotConverged { .. } => "NotConverged",
            Error::MissingColumn(_) => "MissingColumn",
            Error::ParseError { .. } => "ParseError",
            Error::EmptySplit(_) => "EmptySplit",
            Error::InfeasibleRatio { .. } => "InfeasibleRatio",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
        }
    }

    /// Name of the module the error originates from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. }
            | Error::MissingTargetOnSelected { .. }
            | Error::NonBinaryIndicator { .. }
            | Error::NonFiniteValue { .. }
            | Error::NotASubset(_)
            | Error::MaskedTarget(_) => "core_model",
            Error::SingleClass | Error::Diverged { .. } | Error::NotConverged => "probit_selection",
            Error::LayoutMismatch(_) | Error::RankDeficient { .. } => "heckman_two_step",
            Error::EmptyGroup(_) | Error::ZeroVariance(_) | Error::DegenerateConditioning(_) => {
                "fairness_metrics"
            }
            Error::NoBracket { .. }
            | Error::SingularAtLambda(_)
            | Error::IndefiniteInner
            | Error::DualNotConverged { .. } => "fair_solvers",
            Error::MissingColumn(_)
            | Error::ParseError { .. }
            | Error::EmptySplit(_)
            | Error::InfeasibleRatio { .. } => "data_pipeline",
            Error::InvalidConfig(_) | Error::Io(_) => "cli_bench",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
