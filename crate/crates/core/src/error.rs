use thiserror::Error;

/// Errors surfaced by constructors and analytic operations.
///
/// Run-time outcomes of a simulation (divergence, Zeno halt) are not errors;
/// they are reported through the run status so partial logs stay available.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid class-K function: {0}")]
    InvalidClassK(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error("invalid DoS schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid trigger policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid simulation setup: {0}")]
    InvalidRun(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("no sign change in bracket")]
    NoSignChange,

    #[error("cannot generate schedule: {0}")]
    InfeasibleConstraints(String),

    #[error("integration produced a non-finite state at t = {0}")]
    NonFiniteState(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
