//! The drift of the Galerkin system: the nonlinear viscosity `Φ(u) = σ(|u|)u`,
//! the projected dissipative term `π_n A Φ(u)` and the projected convective
//! term `π_n B(u, v)`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{
    cube_to_field, real_spectra, velocity_grid, GridState, PhysicalField, SpectralField,
    VectorCube,
};

/// Parameters of the built-in monotone viscosity law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProuseParams {
    pub nu: f64,
    pub b: f64,
    /// Crossover scale `K`.
    pub k: f64,
    pub a1: f64,
    pub a2: f64,
}

type SigmaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The viscosity law `σ(·)`.
#[derive(Clone)]
pub enum SigmaProfile {
    /// `σ = ν` below `K/2`, `a₁ξ^{b−1}` above `K`, joined by a C¹ cubic.
    Prouse(ProuseParams),
    /// `σ(ξ) = νξ⁴`, i.e. `Φ(u) = ν|u|⁴u`.
    PurePower { nu: f64 },
    /// `σ ≡ ν`: the classical Navier–Stokes viscosity.
    Linear { nu: f64 },
    /// A user-supplied law checked against the same hypotheses as `Prouse`.
    Custom { params: ProuseParams, sigma: SigmaFn },
}

impl fmt::Debug for SigmaProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Prouse(p) => f.debug_tuple("Prouse").field(p).finish(),
            Self::PurePower { nu } => f.debug_struct("PurePower").field("nu", nu).finish(),
            Self::Linear { nu } => f.debug_struct("Linear").field("nu", nu).finish(),
            Self::Custom { params, .. } => f.debug_struct("Custom").field("params", params).finish(),
        }
    }
}

/// Log-spaced sample points used to validate a viscosity law.
fn validation_grid(k: f64) -> Vec<f64> {
    let lo = (k * 1e-4).ln();
    let hi = (k * 1e4).ln();
    let count = 4000;
    let mut pts: Vec<f64> = (0..=count)
        .map(|i| (lo + (hi - lo) * i as f64 / count as f64).exp())
        .collect();
    pts.insert(0, 0.0);
    pts
}

impl SigmaProfile {
    pub fn prouse(params: ProuseParams) -> Result<Self> {
        let p = Self::Prouse(params);
        p.validate()?;
        Ok(p)
    }

    pub fn pure_power(nu: f64) -> Result<Self> {
        let p = Self::PurePower { nu };
        p.validate()?;
        Ok(p)
    }

    pub fn linear(nu: f64) -> Result<Self> {
        let p = Self::Linear { nu };
        p.validate()?;
        Ok(p)
    }

    pub fn custom(params: ProuseParams, sigma: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let p = Self::Custom { params, sigma: Arc::new(sigma) };
        p.validate()?;
        Ok(p)
    }

    /// Viscosity floor `ν`.
    pub fn nu(&self) -> f64 {
        match self {
            Self::Prouse(p) | Self::Custom { params: p, .. } => p.nu,
            Self::PurePower { nu } | Self::Linear { nu } => *nu,
        }
    }

    /// Growth exponent `b` (Φ grows like `|u|^b`).
    pub fn growth_exponent(&self) -> f64 {
        match self {
            Self::Prouse(p) | Self::Custom { params: p, .. } => p.b,
            Self::PurePower { .. } => 5.0,
            Self::Linear { .. } => 1.0,
        }
    }

    pub fn params(&self) -> Option<&ProuseParams> {
        match self {
            Self::Prouse(p) | Self::Custom { params: p, .. } => Some(p),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Prouse(_) => "prouse",
            Self::PurePower { .. } => "pure_power",
            Self::Linear { .. } => "linear",
            Self::Custom { .. } => "custom",
        }
    }

    pub fn is_pure_power(&self) -> bool {
        matches!(self, Self::PurePower { .. })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear { .. })
    }

    /// `σ(ξ)` without the sign check.
    #[inline]
    pub fn sigma(&self, xi: f64) -> f64 {
        match self {
            Self::Prouse(p) => prouse_sigma(p, xi),
            Self::PurePower { nu } => {
                let x2 = xi * xi;
                nu * x2 * x2
            }
            Self::Linear { nu } => *nu,
            Self::Custom { sigma, .. } => sigma(xi),
        }
    }

    pub fn sigma_eval(&self, xi: f64) -> Result<f64> {
        if xi < 0.0 || xi.is_nan() {
            return Err(Error::NegativeArgument(xi));
        }
        Ok(self.sigma(xi))
    }

    /// `σ′(ξ)` for the closed-form laws; a centered difference for custom ones.
    pub fn sigma_derivative(&self, xi: f64) -> f64 {
        match self {
            Self::Prouse(p) => prouse_sigma_derivative(p, xi),
            Self::PurePower { nu } => 4.0 * nu * xi * xi * xi,
            Self::Linear { .. } => 0.0,
            Self::Custom { sigma, .. } => {
                let h = 1e-6 * (1.0 + xi);
                (sigma(xi + h) - sigma((xi - h).max(0.0))) / (xi + h - (xi - h).max(0.0))
            }
        }
    }

    /// `Φ(u) = σ(|u|) u` at a single point.
    #[inline]
    pub fn phi(&self, u: [f64; 3]) -> [f64; 3] {
        let s = self.sigma((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt());
        [s * u[0], s * u[1], s * u[2]]
    }

    /// Checks the hypotheses on σ: `ν > 0`, `b ≥ 4`, `0 < a₁ ≤ a₂`, `K > 0`,
    /// and, sampled on a log grid, `σ ≥ ν`, `σ′ ≥ 0`, and the envelope
    /// `a₁ξ^{b−1} ≤ σ(ξ) ≤ a₂ξ^{b−1}` for `ξ > K`.
    pub fn validate(&self) -> Result<()> {
        let nu = self.nu();
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Profile { hypothesis: "nu > 0", detail: format!("nu = {nu}") });
        }
        let Some(p) = self.params() else {
            return Ok(());
        };
        if !(p.b >= 4.0) {
            return Err(Error::Profile { hypothesis: "b >= 4", detail: format!("b = {}", p.b) });
        }
        if !(p.k > 0.0 && p.k.is_finite()) {
            return Err(Error::Profile { hypothesis: "K > 0", detail: format!("K = {}", p.k) });
        }
        if !(p.a1 > 0.0 && p.a1 <= p.a2) {
            return Err(Error::Profile {
                hypothesis: "0 < a1 <= a2",
                detail: format!("a1 = {}, a2 = {}", p.a1, p.a2),
            });
        }
        let pts = validation_grid(p.k);
        let mut prev = self.sigma(0.0);
        for &xi in &pts {
            let s = self.sigma(xi);
            if !(s >= nu * (1.0 - 1e-12)) {
                return Err(Error::Profile {
                    hypothesis: "sigma(xi) >= nu",
                    detail: format!("sigma({xi}) = {s} < {nu}"),
                });
            }
            if s < prev * (1.0 - 1e-12) {
                return Err(Error::Profile {
                    hypothesis: "sigma'(xi) >= 0",
                    detail: format!("sigma decreases near xi = {xi}"),
                });
            }
            prev = s;
            if xi > p.k {
                let base = xi.powf(p.b - 1.0);
                if s < p.a1 * base * (1.0 - 1e-12) || s > p.a2 * base * (1.0 + 1e-12) {
                    return Err(Error::Profile {
                        hypothesis: "a1 xi^(b-1) <= sigma(xi) <= a2 xi^(b-1) for xi > K",
                        detail: format!("sigma({xi}) = {s}"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn prouse_joint(p: &ProuseParams) -> (f64, f64, f64, f64, f64) {
    let x0 = 0.5 * p.k;
    let h = p.k - x0;
    let p1 = p.a1 * p.k.powf(p.b - 1.0);
    let m1 = p.a1 * (p.b - 1.0) * p.k.powf(p.b - 2.0);
    (x0, h, p.nu, p1, m1)
}

fn prouse_sigma(p: &ProuseParams, xi: f64) -> f64 {
    if xi <= 0.5 * p.k {
        return p.nu;
    }
    if xi >= p.k {
        return p.a1 * xi.powf(p.b - 1.0);
    }
    let (x0, h, p0, p1, m1) = prouse_joint(p);
    let t = (xi - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * h * m1
}

fn prouse_sigma_derivative(p: &ProuseParams, xi: f64) -> f64 {
    if xi <= 0.5 * p.k {
        return 0.0;
    }
    if xi >= p.k {
        return p.a1 * (p.b - 1.0) * xi.powf(p.b - 2.0);
    }
    let (x0, h, p0, p1, m1) = prouse_joint(p);
    let t = (xi - x0) / h;
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * p0 + (-6.0 * t2 + 6.0 * t) * p1 + (3.0 * t2 - 2.0 * t) * h * m1) / h
}

/// Pointwise `Φ` on a physical grid.
pub fn phi_apply(p: &SigmaProfile, g: &PhysicalField) -> PhysicalField {
    PhysicalField {
        length: g.length,
        size: g.size,
        values: g.values.iter().map(|&u| p.phi(u)).collect(),
    }
}

/// Grid averages collected while evaluating Φ on the padded grid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhiStats {
    /// `(1/L³)∫|u|^{1+b}`.
    pub growth_pow: f64,
    /// `(1/L³)∫|u|⁵`.
    pub l5_pow5: f64,
}

/// `π_n Φ(u)` (Leray projected, truncated) and the grid averages.
pub fn project_phi(u: &SpectralField, p: &SigmaProfile) -> (SpectralField, PhiStats) {
    let torus = u.torus();
    let size = torus.padded_size();
    let fft = torus.plan(size);
    let [x, y, z] = velocity_grid(u, size);
    let npts = x.len();
    let mut fx = vec![0.0; npts];
    let mut fy = vec![0.0; npts];
    let mut fz = vec![0.0; npts];
    let q = 1.0 + p.growth_exponent();
    let mut growth = 0.0;
    let mut l5 = 0.0;
    for i in 0..npts {
        let s2 = x[i] * x[i] + y[i] * y[i] + z[i] * z[i];
        let r = s2.sqrt();
        let s = p.sigma(r);
        fx[i] = s * x[i];
        fy[i] = s * y[i];
        fz[i] = s * z[i];
        growth += r.powf(q);
        l5 += s2 * s2 * r;
    }
    let band = torus.cutoff() as usize;
    let spectra = real_spectra(&fft, band, &[&fx, &fy, &fz]);
    let cube = VectorCube { band, comps: spectra.try_into().expect("three components") };
    let stats = PhiStats {
        growth_pow: growth / npts as f64,
        l5_pow5: l5 / npts as f64,
    };
    (cube_to_field(torus, &cube), stats)
}

/// `π_n A Φ(u)`.
pub fn a_phi(u: &SpectralField, p: &SigmaProfile) -> SpectralField {
    a_phi_with_stats(u, p).0
}

pub fn a_phi_with_stats(u: &SpectralField, p: &SigmaProfile) -> (SpectralField, Option<PhiStats>) {
    if let SigmaProfile::Linear { nu } = p {
        return (u.map_eigen(|l| nu * l), None);
    }
    let (phi, stats) = project_phi(u, p);
    (phi.map_eigen(|l| l), Some(stats))
}

/// `π_n B(u, v)` with `B(u, v) = (u·∇)v`, computed in flux form
/// `∂_m(u_m v)` on the 3/2-padded grid.
pub fn b_bilinear(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.ensure_same_space(v)?;
    let torus = u.torus();
    let size = torus.bilinear_size();
    let fft = torus.plan(size);
    let band = torus.cutoff() as usize;
    let unit = torus.wavenumber_unit();
    let same = std::ptr::eq(u, v) || u.coeffs() == v.coeffs();
    let ug = velocity_grid(u, size);
    let vg = if same { None } else { Some(velocity_grid(v, size)) };
    let vg = vg.as_ref().unwrap_or(&ug);
    let npts = ug[0].len();

    // flux[m][c] = û_m v_c, exploiting symmetry when u = v.
    let mut products: Vec<Vec<f64>> = Vec::new();
    let mut slot = [[0usize; 3]; 3];
    for m in 0..3 {
        for c in 0..3 {
            if same && c < m {
                slot[m][c] = slot[c][m];
                continue;
            }
            slot[m][c] = products.len();
            products.push((0..npts).map(|i| ug[m][i] * vg[c][i]).collect());
        }
    }
    let refs: Vec<&[f64]> = products.iter().map(|p| p.as_slice()).collect();
    let spectra = real_spectra(&fft, band, &refs);

    let m_side = 2 * band + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut comps = [vec![zero; m_side.pow(3)], vec![zero; m_side.pow(3)], vec![zero; m_side.pow(3)]];
    let b = band as i64;
    for idx in 0..m_side.pow(3) {
        let k = [
            (idx / (m_side * m_side)) as i64 - b,
            ((idx / m_side) % m_side) as i64 - b,
            (idx % m_side) as i64 - b,
        ];
        for (c, comp) in comps.iter_mut().enumerate() {
            let mut acc = zero;
            for m in 0..3 {
                acc += spectra[slot[m][c]][idx] * (unit * k[m] as f64);
            }
            comp[idx] = acc * Complex64::new(0.0, 1.0);
        }
    }
    Ok(cube_to_field(torus, &VectorCube { band, comps }))
}

/// `−π_n A Φ(u) − π_n B(u, u)`.
pub fn galerkin_drift(u: &SpectralField, p: &SigmaProfile) -> Result<SpectralField> {
    let mut out = a_phi(u, p).scaled(-1.0);
    out.axpy(-1.0, &b_bilinear(u, u)?);
    Ok(out)
}

/// `⟨A Φ(u), u⟩_H`.
///
/// `u` lies in the Galerkin space, so pairing with the projected and
/// truncated `π_n A Φ(u)` loses nothing.
pub fn energy_production(u: &SpectralField, p: &SigmaProfile) -> f64 {
    a_phi(u, p).inner(u)
}

/// Fraction of the solenoidal part of `Φ(u)` (in `H`-norm) carried by
/// resolved wave numbers beyond the truncation: `|(I − π_n) P Φ(u)|_H / |P Φ(u)|_H`.
///
/// Zero in the linear case; for nonlinear σ this measures how far
/// `π_n A Φ(u)` is from `A Φ(u)`.
pub fn truncation_defect(u: &SpectralField, p: &SigmaProfile) -> f64 {
    let torus = u.torus();
    let size = torus.padded_size();
    let state = GridState::new(u, size, false);
    let npts = state.len();
    let mut f = [vec![0.0; npts], vec![0.0; npts], vec![0.0; npts]];
    for i in 0..npts {
        let v = p.phi([state.velocity[0][i], state.velocity[1][i], state.velocity[2][i]]);
        for d in 0..3 {
            f[d][i] = v[d];
        }
    }
    let band = (size - 1) / 2;
    let spectra = real_spectra(&state.fft, band, &[&f[0], &f[1], &f[2]]);
    let n2 = (torus.cutoff() as i64).pow(2);
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (idx, k) in crate::torus::cube_wavevectors(band).into_iter().enumerate() {
        if k == [0, 0, 0] {
            continue;
        }
        let w = [spectra[0][idx], spectra[1][idx], spectra[2][idx]];
        let projected = crate::torus::leray_project(&[(k, w)])[0].1;
        let e: f64 = projected.iter().map(|z| z.norm_sqr()).sum();
        let q: i64 = k.iter().map(|&c| (c as i64).pow(2)).sum();
        if q <= n2 {
            inside += e;
        } else {
            outside += e;
        }
    }
    if inside + outside == 0.0 {
        0.0
    } else {
        (outside / (inside + outside)).sqrt()
    }
}
