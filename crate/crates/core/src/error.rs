use thiserror::Error;

/// Errors produced by the analysis, simulation and optimization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state space of 2^{bits} states exceeds the cap of {cap} states")]
    StateSpaceTooLarge { bits: u32, cap: usize },

    #[error("state index {index} outside 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("quadrature failed: {0}")]
    Integration(String),

    #[error("stationary system is singular (matrix is not irreducible)")]
    SingularSystem,

    #[error("stationary iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("outage floor undefined for N={n}, k={k}: {reason}")]
    FloorUnsupported { n: usize, k: usize, reason: &'static str },

    #[error("slope estimate needs at least 3 points in the window, got {0}")]
    InsufficientPoints(usize),

    #[error("zero outage at {p_db} dB inside the slope window")]
    ZeroOutage { p_db: f64 },

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("at P = {p_db} dB: {source}")]
    AtPower {
        p_db: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
