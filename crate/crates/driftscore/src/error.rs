//! Error type shared across the crate.

use core::fmt;

/// Everything that can go wrong below the IO layer.
///
/// Variants carry the numbers needed to reconstruct the failure site;
/// none of them allocate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A slice had the wrong length for the operation.
    DimensionMismatch { expected: usize, got: usize },
    /// A parameter vector component left its admissible domain.
    InvalidParameter { index: usize, value: f64 },
    /// A configuration value is out of range (particle count, sweep window, ...).
    InvalidConfig(&'static str),
    /// Requested observation level is finer than the stored data grid.
    LevelAboveData { requested: u32, l_star: u32 },
    /// A categorical draw was attempted on weights with no mass.
    ZeroMass,
    /// The diffusion matrix was singular at some state.
    SingularDiffusion,
    /// The rejection loop for coupling two resampling couplings exceeded its cap.
    CouplingFailure { attempts: u64 },
    /// The coupled chains did not meet within the sweep cap.
    NoMeeting { sweeps: u32 },
    /// A non-finite value surfaced where the algorithm needs a finite one.
    NonFinite(&'static str),
    /// The operation is only defined for a restricted model class.
    Unsupported(&'static str),
    /// Every replicate of an averaged run failed.
    AllReplicatesFailed,
    /// Every gradient attempt at one ascent iteration failed.
    GradientFailure { iteration: u32 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidParameter { index, value } => {
                write!(f, "parameter component {index} out of domain: {value}")
            }
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::LevelAboveData { requested, l_star } => {
                write!(
                    f,
                    "level {requested} is finer than the data grid (l* = {l_star})"
                )
            }
            Error::ZeroMass => write!(f, "categorical draw on weights with zero total mass"),
            Error::SingularDiffusion => write!(f, "singular diffusion matrix"),
            Error::CouplingFailure { attempts } => {
                write!(f, "coupling rejection loop gave up after {attempts} attempts")
            }
            Error::NoMeeting { sweeps } => {
                write!(f, "coupled chains did not meet within {sweeps} sweeps")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Unsupported(what) => write!(f, "unsupported: {what}"),
            Error::AllReplicatesFailed => write!(f, "every replicate failed"),
            Error::GradientFailure { iteration } => {
                write!(f, "gradient estimation failed at ascent iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
