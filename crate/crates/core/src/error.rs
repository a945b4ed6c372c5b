use thiserror::Error;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("operation `{op}` is not supported for the {family} system")]
    Unsupported { op: &'static str, family: &'static str },

    #[error("one-form `{form}` is not defined on the {family} system")]
    InvalidForm { form: String, family: &'static str },

    #[error("invalid system definition: {0}")]
    InvalidSystem(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite state at t = {t}: {detail}")]
    NonFinite { t: f64, detail: String },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("energy level k = {k} is not stable for the {family} system")]
    NotStable { k: f64, family: &'static str },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("loop escaped the energy shell (|H - k| = {deviation:.3e})")]
    EscapedShell { deviation: f64 },

    #[error("loop is not closed in the universal cover (gap {gap:.3e})")]
    LoopNotClosed { gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
