//! Geometry of the periodic box, the divergence-free eigenbasis, transforms
//! between coefficient and grid space, and norms.

pub mod fft;
mod field;
mod geometry;
mod lattice;
mod norms;

pub(crate) use field::{cube_to_field, cube_wavevectors, derivative, real_grids, real_spectra, velocity_grid, VectorCube};
pub use field::{
    evaluate_mode, leray_project, synthesize, transform_to_grid, transform_to_spectral,
    PhysicalField, SpectralField,
};
pub use geometry::{Torus, TorusGeometry};
pub use lattice::{basis_pair, half_space_contains, modes_within, Polarization, WaveIndex, WaveVector};
pub use norms::{h_norm_sq, norm, norm_on_grid, v_norm_sq, vprime_norm_sq, GridState, Norm};
