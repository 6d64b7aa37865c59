//! Numerical laboratory for the singular Lane-Emden equation
//!
//! ```text
//! -Δu = λ₊ (u⁺)^(q-1) - λ₋ (u⁻)^(q-1),   0 < q < 1,
//! ```
//!
//! on the two-dimensional unit disc. The crate builds ε-regularized
//! approximating sequences, sign-changing sector solutions, and the
//! diagnostics used to study them: Almgren/Weiss type functionals,
//! spherical Pohozaev residuals, vanishing orders, blow-ups and the
//! one-dimensional and angular ODE reductions.
//!
//! Everything here is pure computation over `alloc` collections; file
//! formats, configuration and the command line live in the `lelab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

#[cfg(all(feature = "std", not(test)))]
extern crate std;

mod error;
mod linalg;
mod math;

pub mod grid;
pub mod monotonicity;
pub mod nodal;
pub mod nonlinearity;
pub mod profiles;
pub mod solver;
pub mod symmetric;

pub use error::{Error, Result};
pub use grid::{DiscGrid, FieldSampler, Integrand, NodeKind, Point, ScalarField, Shape};
pub use nonlinearity::{alpha_max, gamma_q, ProblemParams};
