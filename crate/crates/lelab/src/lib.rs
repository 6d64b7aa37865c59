//! File formats, configuration, pipelines and the acceptance fleet for the
//! `lelab` command line. The numerics live in [`lelab_core`].

use std::fmt;

pub use lelab_core as core;

pub mod config;
pub mod fleet;
pub mod io;
pub mod pipelines;
pub mod verify;

/// Failures that map to a dedicated exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Numerical(String),
    /// Ids of the failed acceptance criteria.
    Verification(Vec<u32>),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "config: {msg}"),
            Failure::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Failure::Verification(ids) => write!(f, "acceptance criteria failed: {ids:?}"),
        }
    }
}

impl std::error::Error for Failure {}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// Exit status for an error: 2 for configuration problems, 3 when a solver
/// or integrator gives up, 4 for failed acceptance criteria, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use lelab_core::Error as E;
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Verification(_) => EXIT_VERIFICATION,
        };
    }
    if err.downcast_ref::<config::ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<E>() {
        Some(E::InvalidParameter { .. } | E::InvalidGrid(_)) => EXIT_CONFIG,
        Some(
            E::NonConvergence { .. } | E::StepRejected { .. } | E::BracketNotFound { .. } | E::PositivityFailed { .. },
        ) => EXIT_NUMERICAL,
        _ => 1,
    }
}
