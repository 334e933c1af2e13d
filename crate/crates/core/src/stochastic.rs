//! Noise: the finite set of forced modes, the operator `G`, Brownian
//! increments and their rescaling, and symmetry checks on the forcing.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{vprime_norm_sq, Polarization, SpectralField, Torus, WaveIndex, WaveVector};

/// One forced coefficient `(k, j)` with its intensity `σ_{k,j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseMode {
    pub k: WaveVector,
    pub j: Polarization,
    pub sigma: f64,
}

impl NoiseMode {
    pub fn new(k: [i32; 3], j: u8, sigma: f64) -> Result<Self> {
        Ok(Self { k: WaveVector::new(k)?, j: Polarization::new(j)?, sigma })
    }

    pub fn index(&self) -> WaveIndex {
        WaveIndex { k: self.k, j: self.j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Additive,
    DiagonalMultiplicative,
}

/// Bounded gain applied to a coefficient in the multiplicative case.
#[derive(Clone)]
pub enum MultGain {
    /// `g(a) = a / (1 + |a|)`.
    Saturating,
    /// `g ≡ 1`.
    Unit,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MultGain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Saturating => f.write_str("Saturating"),
            Self::Unit => f.write_str("Unit"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl MultGain {
    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        match self {
            Self::Saturating => a / (1.0 + a.abs()),
            Self::Unit => 1.0,
            Self::Custom(g) => g(a),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Saturating => "saturating",
            Self::Unit => "unit",
            Self::Custom(_) => "custom",
        }
    }

    /// `(sup |g|, Lipschitz constant of g)`: exact for the built-in laws,
    /// sampled on `[-10³, 10³]` otherwise.
    fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Saturating | Self::Unit => (1.0, if matches!(self, Self::Unit) { 0.0 } else { 1.0 }),
            Self::Custom(g) => {
                let pts: Vec<f64> = (-20000..=20000)
                    .map(|i| {
                        let t = i as f64 / 20000.0;
                        1e3 * t * t * t
                    })
                    .collect();
                let sup = pts.iter().map(|&a| g(a).abs()).fold(0.0, f64::max);
                let lip = pts
                    .windows(2)
                    .filter(|w| w[1] > w[0])
                    .map(|w| ((g(w[1]) - g(w[0])) / (w[1] - w[0])).abs())
                    .fold(0.0, f64::max);
                (sup, lip)
            }
        }
    }
}

/// Growth and Lipschitz certificates `‖G(u)‖²_HS ≤ λ₀|u|²_H + ρ` and
/// `‖A^{-1/2}(G(v) − G(z))‖²_HS ≤ L_G |v − z|²_{V′}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCertificates {
    pub lambda0: f64,
    pub rho: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    modes: Vec<NoiseMode>,
    kind: NoiseKind,
    gain: MultGain,
    certificates: NoiseCertificates,
}

impl NoiseSpec {
    pub fn additive(modes: Vec<NoiseMode>) -> Result<Self> {
        Self::new(NoiseKind::Additive, modes, MultGain::Unit)
    }

    pub fn multiplicative(modes: Vec<NoiseMode>, gain: MultGain) -> Result<Self> {
        Self::new(NoiseKind::DiagonalMultiplicative, modes, gain)
    }

    pub fn none() -> Self {
        Self::additive(Vec::new()).expect("empty spec is valid")
    }

    pub fn new(kind: NoiseKind, modes: Vec<NoiseMode>, gain: MultGain) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &modes {
            if !m.sigma.is_finite() {
                return Err(Error::Noise(format!("non-finite sigma at k = {:?}, j = {}", m.k.components(), m.j.get())));
            }
            if !seen.insert((m.k, m.j)) {
                return Err(Error::Noise(format!(
                    "duplicate noise mode k = {:?}, j = {}",
                    m.k.components(),
                    m.j.get()
                )));
            }
        }
        let sum_sq: f64 = modes.iter().map(|m| m.sigma * m.sigma).sum();
        let max_sq = modes.iter().map(|m| m.sigma * m.sigma).fold(0.0, f64::max);
        let certificates = match kind {
            NoiseKind::Additive => NoiseCertificates { lambda0: 0.0, rho: sum_sq, lipschitz: 0.0 },
            NoiseKind::DiagonalMultiplicative => {
                let (sup, lip) = gain.bounds();
                NoiseCertificates { lambda0: 0.0, rho: sum_sq * sup * sup, lipschitz: max_sq * lip * lip }
            }
        };
        Ok(Self { modes, kind, gain, certificates })
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn gain(&self) -> &MultGain {
        &self.gain
    }

    pub fn certificates(&self) -> NoiseCertificates {
        self.certificates
    }

    /// Same forced modes with every σ multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let modes = self.modes.iter().map(|m| NoiseMode { sigma: m.sigma * factor, ..*m }).collect();
        Self::new(self.kind, modes, self.gain.clone()).expect("scaling keeps a valid spec valid")
    }

    /// Coefficient positions of the forced modes in `torus`.
    pub fn positions(&self, torus: &Torus) -> Result<Vec<usize>> {
        self.modes.iter().map(|m| torus.coefficient_position(m.index())).collect()
    }

    /// Adds `G(u) Δβ` to `target` using precomputed positions.
    pub(crate) fn add_forcing(&self, positions: &[usize], u: &[f64], incr: &[f64], scale: f64, target: &mut [f64]) {
        match self.kind {
            NoiseKind::Additive => {
                for ((m, &p), &db) in self.modes.iter().zip(positions).zip(incr) {
                    target[p] += scale * m.sigma * db;
                }
            }
            NoiseKind::DiagonalMultiplicative => {
                for ((m, &p), &db) in self.modes.iter().zip(positions).zip(incr) {
                    target[p] += scale * m.sigma * self.gain.eval(u[p]) * db;
                }
            }
        }
    }
}

/// `π_n G(u) Δβ`.
pub fn apply_g(spec: &NoiseSpec, u: &SpectralField, incr: &[f64]) -> Result<SpectralField> {
    if incr.len() != spec.len() {
        return Err(Error::Noise(format!("{} increments for {} modes", incr.len(), spec.len())));
    }
    let positions = spec.positions(u.torus())?;
    let mut out = SpectralField::zeros(u.torus());
    spec.add_forcing(&positions, u.coeffs(), incr, 1.0, out.coeffs_mut());
    Ok(out)
}

/// `‖G(u)‖²_HS`.
pub fn hs_norm_squared(spec: &NoiseSpec, u: &SpectralField) -> Result<f64> {
    match spec.kind {
        NoiseKind::Additive => Ok(spec.modes.iter().map(|m| m.sigma * m.sigma).sum()),
        NoiseKind::DiagonalMultiplicative => {
            let positions = spec.positions(u.torus())?;
            Ok(spec
                .modes
                .iter()
                .zip(&positions)
                .map(|(m, &p)| (m.sigma * spec.gain.eval(u.coeffs()[p])).powi(2))
                .sum())
        }
    }
}

/// `‖A^{-1/2}(G(v) − G(z))‖²_HS`.
pub fn hs_difference_vprime(spec: &NoiseSpec, v: &SpectralField, z: &SpectralField) -> Result<f64> {
    v.ensure_same_space(z)?;
    if spec.kind == NoiseKind::Additive {
        return Ok(0.0);
    }
    let torus = v.torus();
    let positions = spec.positions(torus)?;
    Ok(spec
        .modes
        .iter()
        .zip(&positions)
        .map(|(m, &p)| {
            let d = m.sigma * (spec.gain.eval(v.coeffs()[p]) - spec.gain.eval(z.coeffs()[p]));
            d * d / torus.eigenvalue(p / 4)
        })
        .sum())
}

/// Largest observed ratios `‖G(u)‖²_HS / (λ₀|u|²_H + ρ)` and
/// `‖A^{-1/2}(G(v) − G(z))‖²_HS / (L_G|v − z|²_{V′})` over sampled fields.
pub fn sampled_certificate_ratios(
    spec: &NoiseSpec,
    fields: &[SpectralField],
) -> Result<(f64, f64)> {
    let c = spec.certificates;
    let mut growth: f64 = 0.0;
    let mut lip: f64 = 0.0;
    for (i, u) in fields.iter().enumerate() {
        let bound = c.lambda0 * u.inner(u) + c.rho;
        let hs = hs_norm_squared(spec, u)?;
        if bound > 0.0 {
            growth = growth.max(hs / bound);
        } else if hs > 0.0 {
            growth = f64::INFINITY;
        }
        if let Some(z) = fields.get(i + 1) {
            let diff = hs_difference_vprime(spec, u, z)?;
            let denom = c.lipschitz * vprime_norm_sq(&u.sub(z));
            if denom > 0.0 {
                lip = lip.max(diff / denom);
            } else if diff > 0.0 {
                lip = f64::INFINITY;
            }
        }
    }
    Ok((growth, lip))
}

/// `(1/L³) Σ σ²_{k,j}`.
pub fn energy_injection_rate(spec: &NoiseSpec, length: f64) -> f64 {
    spec.modes.iter().map(|m| m.sigma * m.sigma).sum::<f64>() / length.powi(3)
}

/// Additive forcing with intensity `sigma` on every coefficient of the
/// shells `1 ≤ |k|² ≤ 4`.
pub fn default_forcing(sigma: f64) -> NoiseSpec {
    let mut modes = Vec::new();
    for k in crate::torus::modes_within(2) {
        if (1..=4).contains(&k.norm_squared()) {
            for j in Polarization::ALL {
                modes.push(NoiseMode { k, j, sigma });
            }
        }
    }
    NoiseSpec::additive(modes).expect("default forcing is valid")
}

/// Outcome of a symmetry check, with one line per violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub pass: bool,
    pub violations: Vec<String>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn sigma_table(spec: &NoiseSpec) -> BTreeMap<([i32; 3], u8), f64> {
    spec.modes
        .iter()
        .map(|m| ((m.k.components(), m.j.get()), m.sigma.abs()))
        .collect()
}

/// Cosine coefficients matched in absolute value by the sine coefficient
/// with the same wave vector and polarization vector.
pub fn homogeneity_check(spec: &NoiseSpec) -> SymmetryReport {
    let table = sigma_table(spec);
    let mut violations = Vec::new();
    for (&(k, j), &s) in &table {
        if s == 0.0 {
            continue;
        }
        let partner = Polarization::new(j).expect("stored polarizations are valid").phase_partner().get();
        let other = table.get(&(k, partner)).copied().unwrap_or(0.0);
        if !close(s, other) {
            violations.push(format!("k = {k:?}: |sigma_{j}| = {s} but |sigma_{partner}| = {other}"));
        }
    }
    SymmetryReport { pass: violations.is_empty(), violations }
}

/// The 24 proper rotations of the cube as signed permutation matrices.
pub fn cube_rotations() -> Vec<[[i32; 3]; 3]> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        let parity = if matches!(p, [0, 1, 2] | [1, 2, 0] | [2, 0, 1]) { 1 } else { -1 };
        for signs in 0..8 {
            let s = [
                if signs & 1 == 0 { 1 } else { -1 },
                if signs & 2 == 0 { 1 } else { -1 },
                if signs & 4 == 0 { 1 } else { -1 },
            ];
            if parity * s[0] * s[1] * s[2] != 1 {
                continue;
            }
            let mut m = [[0; 3]; 3];
            for r in 0..3 {
                m[r][p[r]] = s[r];
            }
            out.push(m);
        }
    }
    out
}

/// `Λ` closed under the given rotations with equal `|σ|`, where rotated wave
/// vectors are reflected back into the half space.
pub fn isotropy_check(spec: &NoiseSpec, rotations: &[[[i32; 3]; 3]]) -> SymmetryReport {
    let table = sigma_table(spec);
    let mut violations = Vec::new();
    for rot in rotations {
        for (&(k, j), &s) in &table {
            let rk = [0, 1, 2].map(|r| (0..3).map(|c| rot[r][c] * k[c]).sum::<i32>());
            let (canon, _) = WaveVector::canonical(rk).expect("rotation keeps k nonzero");
            let image = table.get(&(canon.components(), j)).copied().unwrap_or(0.0);
            if !close(s, image) {
                violations.push(format!(
                    "rotation {rot:?}: |sigma({k:?}, {j})| = {s} but image {:?} has {image}",
                    canon.components()
                ));
            }
        }
    }
    SymmetryReport { pass: violations.is_empty(), violations }
}

/// A seeded ChaCha stream of standard normal draws.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Fills `out` with independent `N(0, dt)` draws in mode order.
    pub fn fill(&mut self, dt: f64, out: &mut [f64]) {
        let s = dt.sqrt();
        for o in out {
            let z: f64 = self.rng.sample(StandardNormal);
            *o = s * z;
        }
    }

    /// Serialized state: 32-byte key, 8-byte stream id, 16-byte word position.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56);
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 56 {
            return Err(Error::Checkpoint(format!("rng state has {} bytes, expected 56", bytes.len())));
        }
        let seed: [u8; 32] = bytes[..32].try_into().expect("length checked");
        let stream = u64::from_le_bytes(bytes[32..40].try_into().expect("length checked"));
        let pos = u128::from_le_bytes(bytes[40..56].try_into().expect("length checked"));
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(pos);
        Ok(Self { rng })
    }
}

/// `N(0, dt)` increments, one per forced mode.
pub fn sample_increments(spec: &NoiseSpec, stream: &mut NoiseStream, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let mut out = vec![0.0; spec.len()];
    stream.fill(dt, &mut out);
    Ok(out)
}

/// Brownian increments on a uniform time grid, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub dt: f64,
    pub seed: u64,
    modes: usize,
    increments: Vec<f64>,
}

impl BrownianPath {
    /// Draws `steps` increments for `modes` modes from `stream(seed, stream)`.
    pub fn generate(modes: usize, steps: usize, dt: f64, seed: u64, stream: u64) -> Self {
        let mut s = NoiseStream::new(seed, stream);
        let mut increments = vec![0.0; modes * steps];
        for chunk in increments.chunks_mut(modes.max(1)) {
            s.fill(dt, chunk);
        }
        if modes == 0 {
            increments.clear();
        }
        Self { dt, seed, modes, increments }
    }

    pub fn from_increments(dt: f64, seed: u64, modes: usize, increments: Vec<f64>) -> Result<Self> {
        if modes == 0 && !increments.is_empty() || modes > 0 && increments.len() % modes != 0 {
            return Err(Error::Noise("increment count is not a multiple of the mode count".into()));
        }
        Ok(Self { dt, seed, modes, increments })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn steps(&self) -> usize {
        self.increments.len().checked_div(self.modes).unwrap_or(0)
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.increments[i * self.modes..(i + 1) * self.modes]
    }

    /// `β(i·dt)` for every mode; `β(0) = 0`.
    pub fn value_at(&self, i: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.modes];
        for s in 0..i {
            for (a, d) in acc.iter_mut().zip(self.step(s)) {
                *a += d;
            }
        }
        acc
    }

    /// Sums blocks of `factor` consecutive increments (same path, step `factor·dt`).
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        self.combine(factor, 1.0, self.dt * factor as f64)
    }

    fn combine(&self, factor: usize, scale: f64, dt: f64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::MisalignedPath("coarsening factor must be positive".into()));
        }
        let steps = self.steps() / factor;
        let mut increments = vec![0.0; steps * self.modes];
        for s in 0..steps {
            let dst = &mut increments[s * self.modes..(s + 1) * self.modes];
            for f in 0..factor {
                for (d, x) in dst.iter_mut().zip(self.step(s * factor + f)) {
                    *d += x;
                }
            }
            for d in dst.iter_mut() {
                *d *= scale;
            }
        }
        Ok(Self { dt, seed: self.seed, modes: self.modes, increments })
    }
}

/// Ratio `λ^{2/3}·dt / dt_fine`, required to be a positive integer.
fn alignment(lambda: f64, dt_target: f64, dt_fine: f64) -> Result<usize> {
    let r = lambda.powf(2.0 / 3.0) * dt_target / dt_fine;
    let rounded = r.round();
    if rounded < 1.0 || (r - rounded).abs() > 1e-9 * rounded {
        return Err(Error::MisalignedPath(format!(
            "lambda^(2/3) * dt = {} is not a multiple of the stored step {dt_fine}; \
             a fine step of {} (or an integer fraction of it) is required",
            lambda.powf(2.0 / 3.0) * dt_target,
            lambda.powf(2.0 / 3.0) * dt_target
        )));
    }
    Ok(rounded as usize)
}

/// `β^λ(t) = λ^{−1/3} β(λ^{2/3} t)` sampled with step `dt_target`.
pub fn rescaled_path_with_step(path: &BrownianPath, lambda: f64, dt_target: f64) -> Result<BrownianPath> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Invalid(format!("scaling factor must lie in (0, 1], got {lambda}")));
    }
    if lambda == 1.0 && dt_target == path.dt {
        return Ok(path.clone());
    }
    let factor = alignment(lambda, dt_target, path.dt)?;
    path.combine(factor, lambda.powf(-1.0 / 3.0), dt_target)
}

/// `β^λ` on the grid `dt / λ^{2/3}`, one stored increment per output step.
pub fn rescaled_path(path: &BrownianPath, lambda: f64) -> Result<BrownianPath> {
    rescaled_path_with_step(path, lambda, path.dt / lambda.powf(2.0 / 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn mode(k: [i32; 3], j: u8, sigma: f64) -> NoiseMode {
        NoiseMode::new(k, j, sigma).unwrap()
    }

    #[test]
    fn increments_have_variance_dt() {
        let spec = NoiseSpec::additive(vec![mode([1, 0, 0], 1, 1.0), mode([0, 1, 0], 2, 1.0)]).unwrap();
        let dt = 0.01;
        let mut s = NoiseStream::new(42, 0);
        let draws = 100_000;
        let (mut v0, mut v1, mut cov) = (0.0, 0.0, 0.0);
        let mut prods = Vec::with_capacity(draws);
        for _ in 0..draws {
            let x = sample_increments(&spec, &mut s, dt).unwrap();
            v0 += x[0] * x[0];
            v1 += x[1] * x[1];
            cov += x[0] * x[1];
            prods.push(x[0] * x[1]);
        }
        let n = draws as f64;
        assert!((v0 / n - dt).abs() < 0.05 * dt);
        assert!((v1 / n - dt).abs() < 0.05 * dt);
        let mean = cov / n;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * (var / n).sqrt());
    }

    #[test]
    fn increments_are_reproducible() {
        let spec = default_forcing(1.0);
        let a = sample_increments(&spec, &mut NoiseStream::new(7, 3), 0.1).unwrap();
        let b = sample_increments(&spec, &mut NoiseStream::new(7, 3), 0.1).unwrap();
        assert_eq!(a, b);
        let c = sample_increments(&spec, &mut NoiseStream::new(7, 4), 0.1).unwrap();
        assert_ne!(a, c);
        assert!(sample_increments(&spec, &mut NoiseStream::new(7, 3), 0.0).is_err());
    }

    #[test]
    fn stream_state_round_trip() {
        let mut s = NoiseStream::new(99, 5);
        let mut buf = [0.0; 7];
        s.fill(1.0, &mut buf);
        let mut restored = NoiseStream::from_bytes(&s.to_bytes()).unwrap();
        let mut a = [0.0; 5];
        let mut b = [0.0; 5];
        s.fill(1.0, &mut a);
        restored.fill(1.0, &mut b);
        assert_eq!(a, b);
        assert!(NoiseStream::from_bytes(&[0; 10]).is_err());
    }

    #[test]
    fn apply_g_examples() {
        let t = Torus::with_cutoff(TWO_PI, 2).unwrap();
        let u = SpectralField::zeros(&t);
        let spec = NoiseSpec::additive(vec![mode([1, 1, 0], 3, 2.0)]).unwrap();
        assert!(apply_g(&spec, &u, &[0.0]).unwrap().is_zero());
        let out = apply_g(&spec, &u, &[0.5]).unwrap();
        let idx = WaveIndex::new([1, 1, 0], 3).unwrap();
        assert_eq!(out.get(idx).unwrap(), 1.0);
        assert_eq!(out.coeffs().iter().filter(|c| **c != 0.0).count(), 1);

        let modes = vec![mode([1, 0, 0], 1, 0.7), mode([0, 1, -1], 4, -1.3)];
        let add = NoiseSpec::additive(modes.clone()).unwrap();
        let mul = NoiseSpec::multiplicative(modes, MultGain::Unit).unwrap();
        let v = SpectralField::from_coefficients(&t, (0..t.dim()).map(|i| i as f64 * 0.1).collect()).unwrap();
        assert_eq!(apply_g(&add, &v, &[0.3, -0.2]).unwrap(), apply_g(&mul, &v, &[0.3, -0.2]).unwrap());

        let far = NoiseSpec::additive(vec![mode([3, 0, 0], 1, 1.0)]).unwrap();
        assert!(matches!(apply_g(&far, &u, &[1.0]), Err(Error::ModeOutsideTruncation(_))));
    }

    #[test]
    fn duplicate_modes_rejected() {
        let err = NoiseSpec::additive(vec![mode([1, 0, 0], 1, 1.0), mode([1, 0, 0], 1, 2.0)]);
        assert!(matches!(err, Err(Error::Noise(_))));
    }

    #[test]
    fn hs_norm_examples() {
        let t = Torus::with_cutoff(TWO_PI, 2).unwrap();
        let u = SpectralField::from_coefficients(&t, (0..t.dim()).map(|i| (i as f64).sin()).collect()).unwrap();
        let spec = default_forcing(0.5);
        assert_eq!(hs_norm_squared(&spec, &u).unwrap(), spec.certificates().rho);
        let mul = NoiseSpec::multiplicative(spec.modes().to_vec(), MultGain::Saturating).unwrap();
        assert!(hs_norm_squared(&mul, &u).unwrap() <= mul.certificates().rho);
        assert_eq!(hs_norm_squared(&NoiseSpec::none(), &u).unwrap(), 0.0);
    }

    #[test]
    fn multiplicative_certificates_hold_on_samples() {
        use rand::Rng;
        let t = Torus::with_cutoff(TWO_PI, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fields: Vec<_> = (0..200)
            .map(|_| {
                let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
                let c = (0..t.dim()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
                SpectralField::from_coefficients(&t, c).unwrap()
            })
            .collect();
        let mut modes = default_forcing(1.0).modes().to_vec();
        for (i, m) in modes.iter_mut().enumerate() {
            m.sigma = 0.2 + 0.01 * i as f64;
        }
        let mul = NoiseSpec::multiplicative(modes, MultGain::Saturating).unwrap();
        let (growth, lip) = sampled_certificate_ratios(&mul, &fields).unwrap();
        assert!(growth <= 1.0 && lip <= 1.0, "{growth} {lip}");
        let custom = NoiseSpec::multiplicative(mul.modes().to_vec(), MultGain::Custom(Arc::new(|a: f64| a.tanh()))).unwrap();
        let c = custom.certificates();
        assert!((c.lipschitz - mul.certificates().lipschitz).abs() < 1e-3 * c.lipschitz);
        let (growth, lip) = sampled_certificate_ratios(&custom, &fields).unwrap();
        assert!(growth <= 1.0 && lip <= 1.0 + 1e-9);
    }

    #[test]
    fn homogeneity_examples() {
        let k = [1, 2, 0];
        let ok = NoiseSpec::additive(vec![mode(k, 1, 0.5), mode(k, 3, -0.5)]).unwrap();
        assert!(homogeneity_check(&ok).pass);
        let bad = NoiseSpec::additive(vec![mode(k, 1, 0.5)]).unwrap();
        let r = homogeneity_check(&bad);
        assert!(!r.pass && r.violations.len() == 1);
        assert!(homogeneity_check(&NoiseSpec::none()).pass);
        assert!(homogeneity_check(&default_forcing(1.0)).pass);
    }

    #[test]
    fn rotation_group() {
        let rots = cube_rotations();
        assert_eq!(rots.len(), 24);
        let set: HashSet<_> = rots.iter().collect();
        assert_eq!(set.len(), 24);
        for r in &rots {
            let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
            assert_eq!(det, 1);
        }
    }

    #[test]
    fn isotropy_examples() {
        let rots = cube_rotations();
        let shell: Vec<_> = crate::torus::modes_within(1)
            .into_iter()
            .flat_map(|k| Polarization::ALL.map(|j| NoiseMode { k, j, sigma: 0.3 }))
            .collect();
        let spec = NoiseSpec::additive(shell.clone()).unwrap();
        assert!(isotropy_check(&spec, &rots).pass);
        let mut perturbed = shell;
        perturbed[2].sigma = 0.31;
        assert!(!isotropy_check(&NoiseSpec::additive(perturbed).unwrap(), &rots).pass);
        assert!(isotropy_check(&NoiseSpec::none(), &rots).pass);
        assert!(isotropy_check(&default_forcing(1.0), &rots).pass);
        let lone = NoiseSpec::additive(vec![mode([1, 1, 0], 2, 1.0)]).unwrap();
        assert!(!isotropy_check(&lone, &rots).pass);
    }

    #[test]
    fn injection_rate_examples() {
        let two = NoiseSpec::additive(vec![mode([1, 0, 0], 1, 1.0), mode([1, 0, 0], 3, 1.0)]).unwrap();
        assert!((energy_injection_rate(&two, TWO_PI) - 2.0 / TWO_PI.powi(3)).abs() < 1e-15);
        assert_eq!(energy_injection_rate(&NoiseSpec::none(), TWO_PI), 0.0);
        let spec = default_forcing(0.3);
        let r = energy_injection_rate(&spec, 1.7);
        assert!((energy_injection_rate(&spec.scaled(2.0), 1.7) - 4.0 * r).abs() < 1e-14 * r);
    }

    #[test]
    fn rescaled_path_identity_and_alignment() {
        let p = BrownianPath::generate(3, 40, 0.01, 1, 0);
        assert_eq!(rescaled_path(&p, 1.0).unwrap(), p);
        assert_eq!(p.value_at(0), vec![0.0; 3]);
        let lam: f64 = 0.5;
        let r = rescaled_path(&p, lam).unwrap();
        assert_eq!(r.steps(), 40);
        assert!((r.dt - 0.01 / lam.powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((r.step(3)[1] - lam.powf(-1.0 / 3.0) * p.step(3)[1]).abs() < 1e-15);
        // Two fine steps per target step.
        let r2 = rescaled_path_with_step(&p, lam, 0.02 / lam.powf(2.0 / 3.0)).unwrap();
        assert_eq!(r2.steps(), 20);
        let err = rescaled_path_with_step(&p, lam, 0.015 / lam.powf(2.0 / 3.0));
        assert!(matches!(err, Err(Error::MisalignedPath(_))));
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.steps(), 10);
        assert!((c.value_at(10)[2] - p.value_at(40)[2]).abs() < 1e-14);
    }

    #[test]
    fn rescaled_path_keeps_brownian_variance() {
        let lam: f64 = 0.25;
        let members = 4000;
        let steps = 12;
        let dt = 0.05;
        let mut sum_sq = 0.0;
        let mut fourth = 0.0;
        for m in 0..members {
            let p = BrownianPath::generate(1, steps, dt, 17, m as u64);
            let r = rescaled_path(&p, lam).unwrap();
            let v = r.value_at(steps)[0];
            sum_sq += v * v;
            fourth += v.powi(4);
        }
        let t = steps as f64 * dt / lam.powf(2.0 / 3.0);
        let n = members as f64;
        let var = sum_sq / n;
        assert!((var - t).abs() < 0.05 * t, "{var} vs {t}");
        let se = ((fourth / n - var * var) / n).sqrt();
        assert!((var - t).abs() < 3.0 * se);
    }
}
