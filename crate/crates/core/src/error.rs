use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid beam geometry: {0}")]
    InvalidGeometry(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("no convergence after {iterations} iterations (final mismatch {mismatch:e})")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("uplink power {power:e} exceeded cap {cap:e}")]
    DivergenceDetected { power: f64, cap: f64 },
    #[error("SNIR targets are infeasible: {0}")]
    InfeasibleTargets(String),
    #[error("row {row} is degenerate (norm {norm:e})")]
    DegenerateRow { row: usize, norm: f64 },
    #[error("invalid beam colouring: {0}")]
    Coloring(String),
    #[error("invalid Hadamard order {0}: must be a power of two")]
    InvalidOrder(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable code used in diagnostics reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::Parse { .. } => "ParseError",
            Error::Dimension(_) => "DimensionError",
            Error::Value(_) => "ValueError",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::NumericalBreakdown(_) => "NumericalBreakdown",
            Error::DivergenceDetected { .. } => "DivergenceDetected",
            Error::InfeasibleTargets(_) => "InfeasibleTargets",
            Error::DegenerateRow { .. } => "DegenerateRow",
            Error::Coloring(_) => "ColoringError",
            Error::InvalidOrder(_) => "InvalidOrder",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
