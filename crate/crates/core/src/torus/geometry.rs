use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::fft::{fft_friendly, Fft3};
use super::lattice::{basis_pair, modes_within, WaveIndex, WaveVector};
use crate::error::{Error, Result};

/// Parameters of the periodic box `[0, L]³` and its Galerkin truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    /// Side length `L`.
    pub length: f64,
    /// Cutoff: modes with `|k| ≤ n` are retained.
    pub n: u32,
    /// Points per axis of the plain physical grid.
    pub grid_size: usize,
    /// Points per axis of the grid used for Φ and for `L^q`/`X` quadrature.
    pub padded_size: usize,
}

impl TorusGeometry {
    /// Minimal resolving grid `2n + 1`.
    pub fn min_grid(n: u32) -> usize {
        2 * n as usize + 1
    }

    /// Minimal grid on which quintic products of retained modes are alias free.
    pub fn min_padded(n: u32) -> usize {
        3 * Self::min_grid(n)
    }

    /// Minimal grid for the quadratic convective term (3/2 rule).
    pub fn min_bilinear(n: u32) -> usize {
        (3 * Self::min_grid(n)).div_ceil(2)
    }

    /// Default geometry with FFT-friendly grid sizes.
    pub fn new(length: f64, n: u32) -> Self {
        Self {
            length,
            n,
            grid_size: fft_friendly(Self::min_grid(n)),
            padded_size: fft_friendly(Self::min_padded(n)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Geometry(format!("side length must be positive, got {}", self.length)));
        }
        if self.n == 0 {
            return Err(Error::Geometry("cutoff n must be at least 1".into()));
        }
        if self.grid_size < Self::min_grid(self.n) {
            return Err(Error::UnderResolved {
                size: self.grid_size,
                n: self.n,
                required: Self::min_grid(self.n),
            });
        }
        if self.padded_size < Self::min_padded(self.n) {
            return Err(Error::UnderResolved {
                size: self.padded_size,
                n: self.n,
                required: Self::min_padded(self.n),
            });
        }
        Ok(())
    }
}

/// A validated torus with its mode table, polarization frames and cached
/// FFT plans. Shared between fields through `Arc`.
#[derive(Debug)]
pub struct Torus {
    geometry: TorusGeometry,
    modes: Vec<WaveVector>,
    frames: Vec<([f64; 3], [f64; 3])>,
    eigenvalues: Vec<f64>,
    lookup: HashMap<[i32; 3], usize>,
    bilinear_size: usize,
    plans: Mutex<HashMap<usize, Arc<Fft3>>>,
}

impl Torus {
    pub fn new(geometry: TorusGeometry) -> Result<Arc<Self>> {
        geometry.validate()?;
        let modes = modes_within(geometry.n);
        let frames = modes
            .iter()
            .map(|k| basis_pair(k.components()))
            .collect::<Result<Vec<_>>>()?;
        let eigenvalues = modes.iter().map(|k| k.eigenvalue(geometry.length)).collect();
        let lookup = modes
            .iter()
            .enumerate()
            .map(|(i, k)| (k.components(), i))
            .collect();
        Ok(Arc::new(Self {
            geometry,
            modes,
            frames,
            eigenvalues,
            lookup,
            bilinear_size: fft_friendly(TorusGeometry::min_bilinear(geometry.n)),
            plans: Mutex::new(HashMap::new()),
        }))
    }

    /// Torus with default grids for side `length` and cutoff `n`.
    pub fn with_cutoff(length: f64, n: u32) -> Result<Arc<Self>> {
        Self::new(TorusGeometry::new(length, n))
    }

    /// Same mode set and grids on a box of a different side length.
    pub fn rescaled(&self, length: f64) -> Result<Arc<Self>> {
        Self::new(TorusGeometry { length, ..self.geometry })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn length(&self) -> f64 {
        self.geometry.length
    }

    pub fn cutoff(&self) -> u32 {
        self.geometry.n
    }

    /// Number of retained wave vectors (each carries four coefficients).
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Number of real coefficients.
    pub fn dim(&self) -> usize {
        4 * self.modes.len()
    }

    pub fn modes(&self) -> &[WaveVector] {
        &self.modes
    }

    pub fn frame(&self, mode: usize) -> ([f64; 3], [f64; 3]) {
        self.frames[mode]
    }

    pub fn eigenvalue(&self, mode: usize) -> f64 {
        self.eigenvalues[mode]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue `(2π/L)²`.
    pub fn first_eigenvalue(&self) -> f64 {
        let w = 2.0 * std::f64::consts::PI / self.geometry.length;
        w * w
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    pub fn mode_position(&self, k: [i32; 3]) -> Option<usize> {
        self.lookup.get(&k).copied()
    }

    /// Position of coefficient `(k, j)` in the flat coefficient vector.
    pub fn coefficient_position(&self, index: WaveIndex) -> Result<usize> {
        let k = index.k.components();
        self.mode_position(k)
            .map(|m| 4 * m + index.j.offset())
            .ok_or(Error::ModeOutsideTruncation(k))
    }

    pub fn bilinear_size(&self) -> usize {
        self.bilinear_size
    }

    pub fn padded_size(&self) -> usize {
        self.geometry.padded_size
    }

    pub fn grid_size(&self) -> usize {
        self.geometry.grid_size
    }

    /// Wave number scale `2π/L`.
    pub fn wavenumber_unit(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.geometry.length
    }

    pub fn plan(&self, size: usize) -> Arc<Fft3> {
        let mut plans = self.plans.lock().expect("plan cache poisoned");
        plans
            .entry(size)
            .or_insert_with(|| Arc::new(Fft3::new(size)))
            .clone()
    }

    /// Two tori describe the same Galerkin space.
    pub fn same_space(&self, other: &Torus) -> bool {
        self.geometry == other.geometry
    }
}
