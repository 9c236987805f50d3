use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A trajectory produced no confirmed regeneration inside its horizon.
    #[error("censored block: no confirmed regeneration within {horizon} steps ({censored} candidates discarded)")]
    CensoredBlock { horizon: u64, censored: u64 },

    #[error("harvest failed: {censored} of {attempts} block attempts were censored")]
    HarvestFailed { attempts: u64, censored: u64 },

    #[error("covariance matrix is not strictly positive definite (det = {det:e})")]
    DegenerateCovariance { det: f64 },

    #[error("block variance estimate is zero; Gaussian comparison refused")]
    DegenerateSigma,

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("environment is not transient to the right (E[log rho] = {e_log_rho})")]
    NotTransient { e_log_rho: f64, e_rho: f64 },

    #[error(
        "series truncation unreliable: last term {last_term:e} vs partial sum {partial_sum:e}"
    )]
    TruncationUnreliable { last_term: f64, partial_sum: f64 },

    #[error("chain is periodic with period {period}")]
    PeriodicChain { period: usize },

    #[error("values do not lie on a common lattice")]
    NotLattice,

    #[error("exact law not available for this model")]
    ExactUnavailable,

    #[error("empty input")]
    EmptyInput,

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name, printed by the command-line front end.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::CensoredBlock { .. } => "CensoredBlock",
            Error::HarvestFailed { .. } => "HarvestFailed",
            Error::DegenerateCovariance { .. } => "DegenerateCovariance",
            Error::DegenerateSigma => "DegenerateSigma",
            Error::ResourceLimit(_) => "ResourceLimit",
            Error::NotTransient { .. } => "NotTransient",
            Error::TruncationUnreliable { .. } => "TruncationUnreliable",
            Error::PeriodicChain { .. } => "PeriodicChain",
            Error::NotLattice => "NotLattice",
            Error::ExactUnavailable => "ExactUnavailable",
            Error::EmptyInput => "EmptyInput",
            Error::Quadrature(_) => "Quadrature",
            Error::Io(_) => "Io",
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

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
