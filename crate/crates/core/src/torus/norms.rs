//! Spectral norms (`H`, `V`, `V′`) and grid-quadrature norms (`L^q`, `X`).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fft::Fft3;
use super::field::{derivative, field_to_cube, real_grids, SpectralField};
use super::geometry::TorusGeometry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Norm {
    H,
    V,
    VPrime,
    Lq(f64),
    X,
}

/// `|u|_H² = Σ a²`.
pub fn h_norm_sq(u: &SpectralField) -> f64 {
    u.inner(u)
}

/// `‖u‖_V² = Σ λ_k a²`.
pub fn v_norm_sq(u: &SpectralField) -> f64 {
    weighted(u, |l| l)
}

/// `|u|_{V′}² = Σ λ_k⁻¹ a²`.
pub fn vprime_norm_sq(u: &SpectralField) -> f64 {
    weighted(u, |l| 1.0 / l)
}

fn weighted(u: &SpectralField, w: impl Fn(f64) -> f64) -> f64 {
    u.coeffs()
        .chunks_exact(4)
        .enumerate()
        .map(|(m, a)| w(u.torus().eigenvalue(m)) * a.iter().map(|c| c * c).sum::<f64>())
        .sum()
}

/// Norm on the torus' padded quadrature grid.
pub fn norm(u: &SpectralField, which: Norm) -> Result<f64> {
    norm_on_grid(u, which, u.torus().padded_size())
}

/// Norm with `L^q`/`X` quadrature on an explicit grid; grids that cannot
/// integrate the degree-six integrands exactly are rejected.
pub fn norm_on_grid(u: &SpectralField, which: Norm, size: usize) -> Result<f64> {
    match which {
        Norm::H => Ok(h_norm_sq(u).sqrt()),
        Norm::V => Ok(v_norm_sq(u).sqrt()),
        Norm::VPrime => Ok(vprime_norm_sq(u).sqrt()),
        Norm::Lq(q) => {
            if !(q >= 1.0 && q.is_finite()) {
                return Err(Error::Invalid(format!("L^q norm needs finite q >= 1, got {q}")));
            }
            check_quadrature(size, u.torus().cutoff())?;
            Ok(GridState::new(u, size, false).lq_pow(q).powf(1.0 / q))
        }
        Norm::X => {
            check_quadrature(size, u.torus().cutoff())?;
            Ok(GridState::new(u, size, true).x_pow6().powf(1.0 / 6.0))
        }
    }
}

fn check_quadrature(size: usize, n: u32) -> Result<()> {
    let required = TorusGeometry::min_padded(n);
    if size < required {
        Err(Error::UnderResolved { size, n, required })
    } else {
        Ok(())
    }
}

/// Point values (and optionally the velocity gradient) of a field on a
/// quadrature grid, native layout.
pub struct GridState {
    pub fft: Arc<Fft3>,
    pub velocity: [Vec<f64>; 3],
    /// `gradient[m][c] = ∂_m u_c`.
    pub gradient: Option<[[Vec<f64>; 3]; 3]>,
}

impl GridState {
    pub fn new(u: &SpectralField, size: usize, with_gradient: bool) -> Self {
        let torus = u.torus();
        let fft = torus.plan(size);
        let cube = field_to_cube(u);
        let band = cube.band;
        let velocity: [Vec<f64>; 3] = real_grids(
            &fft,
            band,
            &[&cube.comps[0], &cube.comps[1], &cube.comps[2]],
        )
        .try_into()
        .expect("three components");
        let gradient = with_gradient.then(|| {
            let unit = torus.wavenumber_unit();
            let mut d = Vec::with_capacity(9);
            for m in 0..3 {
                for c in 0..3 {
                    d.push(derivative(&cube.comps[c], band, m, unit));
                }
            }
            let refs: Vec<&[_]> = d.iter().map(|v| v.as_slice()).collect();
            let mut grids = real_grids(&fft, band, &refs).into_iter();
            let mut next = || grids.next().expect("nine gradient components");
            [
                [next(), next(), next()],
                [next(), next(), next()],
                [next(), next(), next()],
            ]
        });
        Self { fft, velocity, gradient }
    }

    pub fn len(&self) -> usize {
        self.velocity[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn speed_sq(&self, i: usize) -> f64 {
        let [x, y, z] = &self.velocity;
        x[i] * x[i] + y[i] * y[i] + z[i] * z[i]
    }

    /// Volume average of `f(x)`.
    pub fn mean(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(f).sum::<f64>() / self.len() as f64
    }

    /// `(1/L³)∫|u|^q`.
    pub fn lq_pow(&self, q: f64) -> f64 {
        self.mean(|i| self.speed_sq(i).powf(0.5 * q))
    }

    /// `|u|_X⁶ = (1/L³)∫ |u|⁴|∇u|² + 4|u|² Σ_i (u·∂_i u)²`.
    pub fn x_pow6(&self) -> f64 {
        let g = self.gradient.as_ref().expect("gradient requested");
        let [ux, uy, uz] = &self.velocity;
        self.mean(|i| {
            let s2 = self.speed_sq(i);
            let mut grad2 = 0.0;
            let mut proj = 0.0;
            for m in 0..3 {
                let (a, b, c) = (g[m][0][i], g[m][1][i], g[m][2][i]);
                grad2 += a * a + b * b + c * c;
                let p = ux[i] * a + uy[i] * b + uz[i] * c;
                proj += p * p;
            }
            s2 * s2 * grad2 + 4.0 * s2 * proj
        })
    }
}
