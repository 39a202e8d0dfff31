use std::path::PathBuf;

use thiserror::Error;

/// Broad failure category, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, configuration or preconditions.
    Validation,
    /// Missing, malformed or insufficient data.
    Data,
    /// Numerical failure or an infeasible fit.
    Numeric,
}

/// Which half of a transfer fit failed to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Source,
    Bias,
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Component::Source => f.write_str("source"),
            Component::Bias => f.write_str("bias"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bandwidth: {0}")]
    InvalidBandwidth(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no kernel mass at query (u = {u})")]
    EmptyWindow { u: f64 },

    #[error("no kernel mass at query (u = {u}) in the {component} component")]
    ComponentEmptyWindow { component: Component, u: f64 },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("no non-missing cells to summarize")]
    NoData,

    #[error("bandwidth selection failed: every candidate was unscoreable")]
    SelectionFailure,

    #[error("transfer infeasible: source window empty at {skipped} of {total} target points")]
    TransferInfeasible { skipped: usize, total: usize },

    #[error("operation requires the locally linear method")]
    UnsupportedMethod,

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("insufficient data in {source_id}: {valid} valid rows, need {required}")]
    InsufficientData {
        source_id: String,
        valid: usize,
        required: usize,
    },

    #[error("series do not overlap in time")]
    NoOverlap,

    #[error("sweep failed: {failed} of {total} replications failed")]
    SweepFailed { failed: usize, total: usize },

    #[error("csv error in {path:?}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidBandwidth(_)
            | Error::Shape(_)
            | Error::InvalidInput(_)
            | Error::UnsupportedMethod
            | Error::Config { .. } => ErrorKind::Validation,
            Error::EmptyInput(_)
            | Error::Degenerate(_)
            | Error::NoData
            | Error::InsufficientData { .. }
            | Error::NoOverlap
            | Error::Csv { .. }
            | Error::Io(_) => ErrorKind::Data,
            Error::EmptyWindow { .. }
            | Error::ComponentEmptyWindow { .. }
            | Error::Numeric(_)
            | Error::SelectionFailure
            | Error::TransferInfeasible { .. }
            | Error::SweepFailed { .. } => ErrorKind::Numeric,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidBandwidth(_) => "invalid_bandwidth",
            Error::Shape(_) => "shape",
            Error::EmptyInput(_) => "empty_input",
            Error::InvalidInput(_) => "invalid_input",
            Error::Degenerate(_) => "degenerate_input",
            Error::EmptyWindow { .. } | Error::ComponentEmptyWindow { .. } => "empty_window",
            Error::Numeric(_) => "numeric",
            Error::NoData => "no_data",
            Error::SelectionFailure => "selection_failure",
            Error::TransferInfeasible { .. } => "transfer_infeasible",
            Error::UnsupportedMethod => "unsupported_method",
            Error::Config { .. } => "config",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::NoOverlap => "no_overlap",
            Error::SweepFailed { .. } => "sweep_failed",
            Error::Csv { .. } => "csv",
            Error::Io(_) => "io",
        }
    }

    pub fn is_empty_window(&self) -> bool {
        matches!(
            self,
            Error::EmptyWindow { .. } | Error::ComponentEmptyWindow { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
