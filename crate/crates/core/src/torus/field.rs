//! Truncated divergence-free fields and their grid representations.
//!
//! A [`SpectralField`] stores the real coefficients `a_{k,j}` of
//! `u = Σ a_{k,j} h_{k,j}` with
//!
//! ```text
//! h_{k,1} = √2 v₁ cos(2π k·x / L)    h_{k,3} = √2 v₁ sin(2π k·x / L)
//! h_{k,2} = √2 v₂ cos(2π k·x / L)    h_{k,4} = √2 v₂ sin(2π k·x / L)
//! ```
//!
//! All integrals use the volume-averaged measure `dx / L³`, under which the
//! `h_{k,j}` are orthonormal and `|u|_H² = Σ a²`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::fft::Fft3;
use super::geometry::{Torus, TorusGeometry};
use super::lattice::{basis_pair, WaveIndex};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SpectralField {
    torus: Arc<Torus>,
    coeffs: Vec<f64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.torus.same_space(&other.torus) && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(torus: &Arc<Torus>) -> Self {
        Self { torus: torus.clone(), coeffs: vec![0.0; torus.dim()] }
    }

    /// Coefficients in the order of [`Torus::modes`], four per wave vector.
    pub fn from_coefficients(torus: &Arc<Torus>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != torus.dim() {
            return Err(Error::Invalid(format!(
                "expected {} coefficients, got {}",
                torus.dim(),
                coeffs.len()
            )));
        }
        Ok(Self { torus: torus.clone(), coeffs })
    }

    pub fn single_mode(torus: &Arc<Torus>, index: WaveIndex, amplitude: f64) -> Result<Self> {
        let mut u = Self::zeros(torus);
        u.set(index, amplitude)?;
        Ok(u)
    }

    pub fn torus(&self) -> &Arc<Torus> {
        &self.torus
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, index: WaveIndex) -> Result<f64> {
        Ok(self.coeffs[self.torus.coefficient_position(index)?])
    }

    pub fn set(&mut self, index: WaveIndex, value: f64) -> Result<()> {
        let p = self.torus.coefficient_position(index)?;
        self.coeffs[p] = value;
        Ok(())
    }

    pub fn ensure_same_space(&self, other: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(&self.torus, &other.torus) || self.torus.same_space(&other.torus) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }

    /// `⟨self, other⟩_H`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            torus: self.torus.clone(),
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &SpectralField) {
        for (a, b) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Multiplies every coefficient of wave vector `k` by `f(λ_k)`.
    pub fn map_eigen(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for (m, block) in out.coeffs.chunks_exact_mut(4).enumerate() {
            let s = f(self.torus.eigenvalue(m));
            block.iter_mut().for_each(|c| *c *= s);
        }
        out
    }

    /// Same coefficients viewed on another torus with an identical mode set.
    pub fn with_torus(&self, torus: &Arc<Torus>) -> Result<Self> {
        if torus.cutoff() != self.torus.cutoff() {
            return Err(Error::GeometryMismatch);
        }
        Ok(Self { torus: torus.clone(), coeffs: self.coeffs.clone() })
    }
}

/// Point values of a vector field on a uniform `size³` grid, point
/// `(i0, i1, i2)` at `x = i·L/size`, stored at `(i0·size + i1)·size + i2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub length: f64,
    pub size: usize,
    pub values: Vec<[f64; 3]>,
}

impl PhysicalField {
    pub fn new(length: f64, size: usize, values: Vec<[f64; 3]>) -> Result<Self> {
        if values.len() != size * size * size {
            return Err(Error::Invalid(format!(
                "grid of size {size} needs {} values, got {}",
                size * size * size,
                values.len()
            )));
        }
        Ok(Self { length, size, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(length: f64, size: usize, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let h = length / size as f64;
        let mut values = Vec::with_capacity(size * size * size);
        for i0 in 0..size {
            for i1 in 0..size {
                for i2 in 0..size {
                    values.push(f([i0 as f64 * h, i1 as f64 * h, i2 as f64 * h]));
                }
            }
        }
        Self { length, size, values }
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.size + i[1]) * self.size + i[2]
    }

    pub fn point(&self, i: [usize; 3]) -> [f64; 3] {
        let h = self.length / self.size as f64;
        [i[0] as f64 * h, i[1] as f64 * h, i[2] as f64 * h]
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.size as f64
    }
}

/// `h_{k,j}(x)` on the torus of side `length`.
pub fn evaluate_mode(index: WaveIndex, length: f64, x: [f64; 3]) -> [f64; 3] {
    let k = index.k.components();
    // `basis_pair` only fails on the origin, which `WaveVector` excludes.
    let (v1, v2) = basis_pair(k).expect("wave vector is nonzero");
    let phase = 2.0 * std::f64::consts::PI / length
        * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
    let j = index.j;
    let s = if j.is_cosine() { phase.cos() } else { phase.sin() };
    let v = if j.plane() == 0 { v1 } else { v2 };
    [SQRT_2 * s * v[0], SQRT_2 * s * v[1], SQRT_2 * s * v[2]]
}

/// Direct summation of the truncated series at arbitrary points.
pub fn synthesize(u: &SpectralField, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let torus = u.torus();
    let unit = torus.wavenumber_unit();
    points
        .iter()
        .map(|x| {
            let mut acc = [0.0; 3];
            for (m, k) in torus.modes().iter().enumerate() {
                let a = &u.coeffs()[4 * m..4 * m + 4];
                if a.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let k = k.components();
                let phase = unit * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
                let (s, c) = phase.sin_cos();
                let (v1, v2) = torus.frame(m);
                let cc = SQRT_2 * c;
                let ss = SQRT_2 * s;
                for d in 0..3 {
                    acc[d] += cc * (a[0] * v1[d] + a[1] * v2[d]) + ss * (a[2] * v1[d] + a[3] * v2[d]);
                }
            }
            acc
        })
        .collect()
}

/// Complex Fourier coefficients of each velocity component on a cube of
/// wave numbers `[-band, band]³` (see [`Fft3`] for the layout).
#[derive(Clone, Debug)]
pub(crate) struct VectorCube {
    pub band: usize,
    pub comps: [Vec<Complex64>; 3],
}

impl VectorCube {
    #[inline]
    pub fn offset(band: usize, k: [i32; 3]) -> usize {
        let m = 2 * band + 1;
        let b = band as i32;
        (((k[0] + b) as usize * m) + (k[1] + b) as usize) * m + (k[2] + b) as usize
    }
}

/// Wave vector of each cube offset, for spectral multipliers.
pub(crate) fn cube_wavevectors(band: usize) -> Vec<[i32; 3]> {
    let b = band as i32;
    let mut out = Vec::with_capacity((2 * band + 1).pow(3));
    for k0 in -b..=b {
        for k1 in -b..=b {
            for k2 in -b..=b {
                out.push([k0, k1, k2]);
            }
        }
    }
    out
}

pub(crate) fn field_to_cube(u: &SpectralField) -> VectorCube {
    let torus = u.torus();
    let band = torus.cutoff() as usize;
    let m = 2 * band + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut comps = [vec![zero; m * m * m], vec![zero; m * m * m], vec![zero; m * m * m]];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (mode, k) in torus.modes().iter().enumerate() {
        let a = &u.coeffs()[4 * mode..4 * mode + 4];
        let (v1, v2) = torus.frame(mode);
        let k = k.components();
        let plus = VectorCube::offset(band, k);
        let minus = VectorCube::offset(band, [-k[0], -k[1], -k[2]]);
        for d in 0..3 {
            let c = a[0] * v1[d] + a[1] * v2[d];
            let sn = a[2] * v1[d] + a[3] * v2[d];
            let w = Complex64::new(s * c, -s * sn);
            comps[d][plus] = w;
            comps[d][minus] = w.conj();
        }
    }
    VectorCube { band, comps }
}

/// Leray projection and truncation of a cube back onto the Galerkin space.
///
/// Projecting the Hermitian part of `û_k` onto `span{v₁, v₂}` removes the
/// component along `k`, which is the Leray projection; the `k = 0` entry and
/// modes with `|k| > n` are dropped.
pub(crate) fn cube_to_field(torus: &Arc<Torus>, cube: &VectorCube) -> SpectralField {
    assert!(cube.band >= torus.cutoff() as usize, "cube does not cover the truncation");
    let mut coeffs = vec![0.0; torus.dim()];
    for (mode, k) in torus.modes().iter().enumerate() {
        let k = k.components();
        let plus = VectorCube::offset(cube.band, k);
        let minus = VectorCube::offset(cube.band, [-k[0], -k[1], -k[2]]);
        let mut c = [0.0; 3];
        let mut sn = [0.0; 3];
        for d in 0..3 {
            let w = (cube.comps[d][plus] + cube.comps[d][minus].conj()) * 0.5;
            c[d] = SQRT_2 * w.re;
            sn[d] = -SQRT_2 * w.im;
        }
        let (v1, v2) = torus.frame(mode);
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        coeffs[4 * mode] = dot(c, v1);
        coeffs[4 * mode + 1] = dot(c, v2);
        coeffs[4 * mode + 2] = dot(sn, v1);
        coeffs[4 * mode + 3] = dot(sn, v2);
    }
    SpectralField { torus: torus.clone(), coeffs }
}

/// `∂_axis` of a scalar cube: multiplies by `i (2π/L) k_axis`.
pub(crate) fn derivative(cube: &[Complex64], band: usize, axis: usize, unit: f64) -> Vec<Complex64> {
    let b = band as i64;
    let m = 2 * band + 1;
    cube.iter()
        .enumerate()
        .map(|(idx, c)| {
            let a = [idx / (m * m), (idx / m) % m, idx % m];
            let k = a[axis] as i64 - b;
            c * Complex64::new(0.0, unit * k as f64)
        })
        .collect()
}

/// Real grids (native layout) of Hermitian cubes; cubes are packed in pairs.
pub(crate) fn real_grids(fft: &Fft3, band: usize, cubes: &[&[Complex64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(cubes.len());
    for pair in cubes.chunks(2) {
        if pair.len() == 2 {
            let packed: Vec<Complex64> = pair[0]
                .iter()
                .zip(pair[1])
                .map(|(f, g)| f + Complex64::new(0.0, 1.0) * g)
                .collect();
            let grid = fft.synthesize(band, &packed);
            out.push(grid.iter().map(|z| z.re).collect());
            out.push(grid.iter().map(|z| z.im).collect());
        } else {
            let grid = fft.synthesize(band, pair[0]);
            out.push(grid.iter().map(|z| z.re).collect());
        }
    }
    out
}

/// Band-limited spectra of real grids (native layout), packed in pairs.
pub(crate) fn real_spectra(fft: &Fft3, band: usize, grids: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(grids.len());
    for pair in grids.chunks(2) {
        if pair.len() == 2 {
            let packed: Vec<Complex64> =
                pair[0].iter().zip(pair[1]).map(|(&f, &g)| Complex64::new(f, g)).collect();
            let h = fft.analyze(band, &packed);
            let last = h.len() - 1;
            let mut f = Vec::with_capacity(h.len());
            let mut g = Vec::with_capacity(h.len());
            for (i, hk) in h.iter().enumerate() {
                let hm = h[last - i].conj();
                f.push((hk + hm) * 0.5);
                g.push((hk - hm) * Complex64::new(0.0, -0.5));
            }
            out.push(f);
            out.push(g);
        } else {
            let packed: Vec<Complex64> = pair[0].iter().map(|&f| Complex64::new(f, 0.0)).collect();
            out.push(fft.analyze(band, &packed));
        }
    }
    out
}

/// Velocity components of `u` on a `size³` grid in native layout.
pub(crate) fn velocity_grid(u: &SpectralField, size: usize) -> [Vec<f64>; 3] {
    let fft = u.torus().plan(size);
    let cube = field_to_cube(u);
    let [x, y, z]: [Vec<f64>; 3] = real_grids(
        &fft,
        cube.band,
        &[&cube.comps[0], &cube.comps[1], &cube.comps[2]],
    )
    .try_into()
    .expect("three components");
    [x, y, z]
}

fn check_resolves(size: usize, n: u32) -> Result<()> {
    let required = TorusGeometry::min_grid(n);
    if size < required {
        Err(Error::UnderResolved { size, n, required })
    } else {
        Ok(())
    }
}

/// Values of `u` on a uniform `size³` grid via FFT.
pub fn transform_to_grid(u: &SpectralField, size: usize) -> Result<PhysicalField> {
    check_resolves(size, u.torus().cutoff())?;
    let fft = u.torus().plan(size);
    let [x, y, z] = velocity_grid(u, size);
    let mut values = vec![[0.0; 3]; size * size * size];
    for i0 in 0..size {
        for i1 in 0..size {
            for i2 in 0..size {
                let nat = fft.native_index([i0, i1, i2]);
                values[(i0 * size + i1) * size + i2] = [x[nat], y[nat], z[nat]];
            }
        }
    }
    Ok(PhysicalField { length: u.torus().length(), size, values })
}

/// Fourier analysis, Leray projection and truncation of a grid field.
pub fn transform_to_spectral(torus: &Arc<Torus>, g: &PhysicalField) -> Result<SpectralField> {
    if (g.length - torus.length()).abs() > 1e-12 * torus.length() {
        return Err(Error::GeometryMismatch);
    }
    check_resolves(g.size, torus.cutoff())?;
    let size = g.size;
    let fft = torus.plan(size);
    let mut comps = [vec![0.0; size.pow(3)], vec![0.0; size.pow(3)], vec![0.0; size.pow(3)]];
    for i0 in 0..size {
        for i1 in 0..size {
            for i2 in 0..size {
                let nat = fft.native_index([i0, i1, i2]);
                let v = g.values[(i0 * size + i1) * size + i2];
                for d in 0..3 {
                    comps[d][nat] = v[d];
                }
            }
        }
    }
    let band = torus.cutoff() as usize;
    let spectra = real_spectra(&fft, band, &[&comps[0], &comps[1], &comps[2]]);
    let cube = VectorCube {
        band,
        comps: spectra.try_into().expect("three components"),
    };
    Ok(cube_to_field(torus, &cube))
}

/// Leray projection of complex Fourier coefficients:
/// `û_k ← û_k − k (k·û_k)/|k|²`, with the mean (`k = 0`) removed.
pub fn leray_project(coeffs: &[([i32; 3], [Complex64; 3])]) -> Vec<([i32; 3], [Complex64; 3])> {
    coeffs
        .iter()
        .map(|&(k, u)| {
            if k == [0, 0, 0] {
                return (k, [Complex64::new(0.0, 0.0); 3]);
            }
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
            let dot = u[0] * kf[0] + u[1] * kf[1] + u[2] * kf[2];
            let s = dot / k2;
            (k, [u[0] - s * kf[0], u[1] - s * kf[1], u[2] - s * kf[2]])
        })
        .collect()
}
