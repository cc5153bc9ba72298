//! Blob particle methods for nonlinear continuity equations with
//! discrete-gradient time stepping.
//!
//! Two model families are covered: aggregation-diffusion equations (internal
//! energy, external and interaction potentials) and the spatially homogeneous
//! Landau collision equation. Particles carry constant weights; the implicit
//! mean-value discrete-gradient schemes dissipate the regularized energy and,
//! for Landau, conserve momentum and kinetic energy exactly up to the
//! fixed-point tolerance.
//!
//! Module map:
//! - [`ensemble`]: grids, particle initialization, blob reconstruction.
//! - [`models`]: mollifier, regularized energies and their gradients,
//!   collision kernel.
//! - [`dynamics`]: particle velocity fields.
//! - [`integrators`]: mean-value discrete gradient and the implicit steppers.
//! - [`diagnostics`]: conserved quantities, Fisher information, dissipation
//!   rate, analytic solutions and error norms.
//! - [`cli`]: scenario registry, config parsing, run / converge / check.

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod integrators;
pub mod models;

pub use error::{Error, Result};
