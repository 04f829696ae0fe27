//! Error type shared across the crate.

use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by constructors, recursions, and predictors.
///
/// Variants are grouped by nature: shape/value problems are configuration
/// errors, spectral-condition failures are violated math preconditions, and
/// [`Error::Diverged`] is a runtime outcome of an unstable recursion.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix dimension does not match the expected one.
    DimensionMismatch { expected: usize, found: usize },
    /// A quantity that must be finite is NaN or infinite.
    NonFinite(&'static str),
    /// A scalar parameter is outside its admissible range.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// A matrix expected to be left-stochastic has a bad column.
    NotLeftStochastic { column: usize, sum: f64 },
    /// A matrix expected to be right-stochastic has a bad row.
    NotRightStochastic { row: usize, sum: f64 },
    /// A matrix entry that must be nonnegative is negative.
    NegativeEntry { row: usize, col: usize, value: f64 },
    /// A matrix expected to be doubly stochastic is not.
    NotDoublyStochastic,
    /// A nonnegative matrix is not primitive (no power is entrywise
    /// positive), i.e. the underlying network is not strongly connected.
    NotPrimitive(&'static str),
    /// A matrix expected to be symmetric positive-definite is not.
    NotPositiveDefinite(&'static str),
    /// The averaging matrix has a subdominant eigenvalue on or outside the
    /// unit circle, so repeated combining does not contract.
    NoSpectralGap { magnitude: f64 },
    /// Power iteration did not meet its tolerance within the iteration cap.
    PowerIterationStalled { iterations: usize },
    /// A step-size process has zero mean, so the effective step-size is
    /// undefined.
    ZeroMeanStepSize,
    /// A data sample variant does not match the cost variant.
    SampleMismatch,
    /// Fusion weights left the probability simplex.
    SimplexViolation { sum: f64 },
    /// An iterate left the guard region; the recursion is treated as
    /// diverged.
    Diverged { iteration: usize, agent: usize },
    /// Two reports being compared were produced from different
    /// configurations.
    DigestMismatch,
    /// A report cannot be used for the requested analysis.
    NotComparable(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::NotLeftStochastic { column, sum } => {
                write!(f, "matrix is not left-stochastic: column {column} sums to {sum}")
            }
            Error::NotRightStochastic { row, sum } => {
                write!(f, "matrix is not right-stochastic: row {row} sums to {sum}")
            }
            Error::NegativeEntry { row, col, value } => {
                write!(f, "negative entry {value} at ({row}, {col})")
            }
            Error::NotDoublyStochastic => write!(f, "matrix is not doubly stochastic"),
            Error::NotPrimitive(what) => {
                write!(f, "{what} is not primitive (network not strongly connected)")
            }
            Error::NotPositiveDefinite(what) => {
                write!(f, "{what} is not symmetric positive-definite")
            }
            Error::NoSpectralGap { magnitude } => {
                write!(f, "subdominant eigenvalue magnitude {magnitude} is not below one")
            }
            Error::PowerIterationStalled { iterations } => {
                write!(f, "power iteration did not converge within {iterations} iterations")
            }
            Error::ZeroMeanStepSize => {
                write!(f, "step-size process has zero mean; effective step-size undefined")
            }
            Error::SampleMismatch => write!(f, "data sample variant does not match cost variant"),
            Error::SimplexViolation { sum } => {
                write!(f, "fusion weights are off the simplex (sum {sum})")
            }
            Error::Diverged { iteration, agent } => {
                write!(f, "recursion diverged at iteration {iteration} (agent {agent})")
            }
            Error::DigestMismatch => write!(f, "configuration digests do not match"),
            Error::NotComparable(reason) => write!(f, "not comparable: {reason}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
