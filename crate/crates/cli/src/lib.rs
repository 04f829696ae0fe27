//! Standard-library companion to `asyncnet-core`: JSON experiment configs,
//! a rayon-parallel Monte Carlo driver whose output is bit-identical to the
//! serial engine, theory reports, file outputs, and canned demo scenarios.

pub mod config;
pub mod demos;
pub mod predict;
pub mod report;
pub mod runner;

use config::ResolveError;

/// Process-level error classes mapped to the exit-code contract:
/// 0 success, 2 configuration error, 3 violated math precondition,
/// 4 runtime divergence; anything else (IO) exits 1.
#[derive(Debug)]
pub enum AppError {
    Io(String),
    Config(String),
    Math(String),
    Divergence(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io(_) => 1,
            AppError::Config(_) => 2,
            AppError::Math(_) => 3,
            AppError::Divergence(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Io(m) | AppError::Config(m) | AppError::Math(m) | AppError::Divergence(m) => m,
        }
    }
}

impl From<ResolveError> for AppError {
    fn from(e: ResolveError) -> Self {
        match e {
            ResolveError::Config(c) => AppError::Config(c.to_string()),
            ResolveError::Math(m) => AppError::Math(format!("math precondition violated: {m}")),
        }
    }
}

impl From<asyncnet_core::Error> for AppError {
    fn from(e: asyncnet_core::Error) -> Self {
        use asyncnet_core::Error as E;
        match e {
            E::NotPrimitive(_)
            | E::NotPositiveDefinite(_)
            | E::NotDoublyStochastic
            | E::NoSpectralGap { .. }
            | E::PowerIterationStalled { .. } => {
                AppError::Math(format!("math precondition violated: {e}"))
            }
            E::Diverged { .. } => AppError::Divergence(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for AppError {}
