use alloc::string::String;
use core::fmt;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix with zero rows or columns where a nonempty one is required.
    EmptyMatrix,
    /// A non-finite entry (NaN or infinity) was found at construction.
    NonFiniteEntry { row: usize, col: usize },
    /// Shapes of two operands do not agree.
    DimensionMismatch { expected: usize, actual: usize },
    /// A requested rank exceeds the number of available singular values.
    RankOutOfRange { requested: usize, max: usize },
    /// The bidiagonal QR iteration did not converge.
    ConvergenceFailure,
    /// No measurement has a common treatment across all units.
    NoCommonMeasurements,
    /// The target unit set is empty.
    EmptyTargetSet,
    /// An arm needed for imputation has no donor units at `t*`.
    DegenerateDesign { arm: u8 },
    /// Weight vector is not aligned with the donor index set.
    MisalignedWeights { expected: usize, actual: usize },
    /// A nonlinear outcome family needs `linearization_rank` in the config.
    MissingLinearizationRank,
    /// Too few samples for a fit (e.g. the dispersion exponent).
    InsufficientSamples { needed: usize, actual: usize },
    /// Configuration value outside its documented domain.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyMatrix => write!(f, "matrix must be nonempty"),
            Error::NonFiniteEntry { row, col } => {
                write!(f, "non-finite entry at ({row}, {col})")
            }
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Error::RankOutOfRange { requested, max } => {
                write!(f, "rank {requested} out of range (max {max})")
            }
            Error::ConvergenceFailure => write!(f, "SVD iteration failed to converge"),
            Error::NoCommonMeasurements => {
                write!(f, "no measurement has a common treatment across all units")
            }
            Error::EmptyTargetSet => write!(f, "target unit set is empty"),
            Error::DegenerateDesign { arm } => {
                write!(f, "no donor units observed under treatment {arm} at t*")
            }
            Error::MisalignedWeights { expected, actual } => {
                write!(
                    f,
                    "weight vector length {actual} does not match donor set size {expected}"
                )
            }
            Error::MissingLinearizationRank => {
                write!(f, "nonlinear outcome family requires linearization_rank")
            }
            Error::InsufficientSamples { needed, actual } => {
                write!(f, "need at least {needed} samples, got {actual}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
