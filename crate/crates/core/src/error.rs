use irs_conic::{ConicError, Status};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not place {k} users after {attempts} attempts")]
    PlacementFailure { k: usize, attempts: usize },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no feasible initialization after {attempts} phase draws")]
    InitializationInfeasible { attempts: usize },
    #[error("beamforming problem is infeasible for the given phases")]
    Infeasible,
    #[error("conic solver stopped with status {0}")]
    Solver(Status),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable, machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "config-error",
            Error::PlacementFailure { .. } => "placement-failure",
            Error::NonPositiveDistance(_) | Error::InvalidArgument(_) => "invalid-argument",
            Error::Dimension(_) => "dimension-mismatch",
            Error::Parse { .. } => "parse-error",
            Error::InitializationInfeasible { .. } => "initialization-infeasible",
            Error::Infeasible => "infeasible",
            Error::Solver(_) => "solver-failure",
            Error::Conic(ConicError::PsdTooLarge { .. }) => "dimension-cap",
            Error::Conic(_) => "solver-failure",
            Error::Io(_) | Error::Csv(_) => "io-error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
