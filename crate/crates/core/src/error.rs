use alloc::string::String;
use core::fmt;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated its admissible range.
    InvalidParameter { name: &'static str, reason: String },
    /// Even or too small node count for a grid.
    InvalidGrid(String),
    /// Two fields or a field and an operation disagree on their grid.
    GridMismatch,
    /// A circle or ball left the region where the field is resolved.
    RadiusOutOfDomain { r: f64 },
    /// An iterative solver hit its iteration cap.
    NonConvergence {
        iterations: usize,
        residual: f64,
    },
    /// A sector solution failed the positivity check for every seed.
    PositivityFailed { min_value: f64, seeds_tried: usize },
    /// No sign change of the shooting mismatch was found in the μ scan range.
    BracketNotFound { trace: String },
    /// Step halving could not keep the Hamiltonian jump below threshold.
    StepRejected { t: f64, jump: f64 },
    /// A blow-up scale below the resolution floor.
    ScaleBelowResolution { scale: f64, floor: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid parameter {name}: {reason}"),
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::GridMismatch => write!(f, "grid mismatch"),
            Error::RadiusOutOfDomain { r } => write!(f, "radius out of domain (r = {r})"),
            Error::NonConvergence { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e})")
            }
            Error::PositivityFailed { min_value, seeds_tried } => {
                write!(f, "positivity failed (min {min_value:e} after {seeds_tried} seeds)")
            }
            Error::BracketNotFound { trace } => write!(f, "bracket for mu not found: {trace}"),
            Error::StepRejected { t, jump } => {
                write!(f, "step rejected at t = {t}: Hamiltonian jump {jump:e}")
            }
            Error::ScaleBelowResolution { scale, floor } => {
                write!(f, "scale {scale} below resolution floor {floor}")
            }
        }
    }
}

impl core::error::Error for Error {}
