//! Pseudo-spectral Galerkin simulation of the stochastic Navier–Stokes
//! equations with monotone nonlinear viscosity on the 3-torus, together with
//! numerical certification of the structural inequalities behind the
//! well-posedness theory.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod io;
pub mod stochastic;
pub mod torus;

pub use error::{Error, Result};
