//! Integer wave vectors, the half-space Z³₊ and the polarization frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Membership in Z³₊ = {k₁>0} ∪ {k₁=0,k₂>0} ∪ {k₁=0,k₂=0,k₃>0}.
///
/// Exactly one of `k` and `-k` is accepted for every nonzero `k`; the origin
/// is rejected.
pub fn half_space_contains(k: [i32; 3]) -> bool {
    k[0] > 0 || (k[0] == 0 && k[1] > 0) || (k[0] == 0 && k[1] == 0 && k[2] > 0)
}

/// A nonzero lattice vector in the half-space Z³₊.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[i32; 3]", into = "[i32; 3]")]
pub struct WaveVector([i32; 3]);

impl WaveVector {
    pub fn new(k: [i32; 3]) -> Result<Self> {
        if half_space_contains(k) {
            Ok(Self(k))
        } else {
            Err(Error::InvalidWaveVector(k))
        }
    }

    /// Maps any nonzero lattice vector into Z³₊, returning the representative
    /// and whether it had to be reflected.
    pub fn canonical(k: [i32; 3]) -> Result<(Self, bool)> {
        if k == [0, 0, 0] {
            return Err(Error::InvalidWaveVector(k));
        }
        if half_space_contains(k) {
            Ok((Self(k), false))
        } else {
            Ok((Self([-k[0], -k[1], -k[2]]), true))
        }
    }

    #[inline]
    pub fn components(&self) -> [i32; 3] {
        self.0
    }

    #[inline]
    pub fn norm_squared(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    /// Eigenvalue of A = −Δ on the torus of side `length`: (2π/L)²|k|².
    pub fn eigenvalue(&self, length: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI / length;
        w * w * self.norm_squared() as f64
    }
}

impl TryFrom<[i32; 3]> for WaveVector {
    type Error = Error;

    fn try_from(k: [i32; 3]) -> Result<Self> {
        Self::new(k)
    }
}

impl From<WaveVector> for [i32; 3] {
    fn from(k: WaveVector) -> Self {
        k.0
    }
}

/// Polarization/phase family of an eigenfunction.
///
/// `1`,`2` are the cosine modes along `v₁`,`v₂`; `3`,`4` the sine modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Polarization(u8);

impl Polarization {
    pub const ALL: [Polarization; 4] = [Self(1), Self(2), Self(3), Self(4)];

    pub fn new(j: u8) -> Result<Self> {
        if (1..=4).contains(&j) {
            Ok(Self(j))
        } else {
            Err(Error::InvalidPolarization(j))
        }
    }

    #[inline]
    pub fn get(&self) -> u8 {
        self.0
    }

    /// Offset of this polarization inside a mode's block of four coefficients.
    #[inline]
    pub fn offset(&self) -> usize {
        (self.0 - 1) as usize
    }

    #[inline]
    pub fn is_cosine(&self) -> bool {
        self.0 <= 2
    }

    /// Index of the frame vector (0 for `v₁`, 1 for `v₂`).
    #[inline]
    pub fn plane(&self) -> usize {
        ((self.0 - 1) % 2) as usize
    }

    /// The partner with the same frame vector and the other phase.
    pub fn phase_partner(&self) -> Self {
        match self.0 {
            1 => Self(3),
            2 => Self(4),
            3 => Self(1),
            _ => Self(2),
        }
    }
}

impl TryFrom<u8> for Polarization {
    type Error = Error;

    fn try_from(j: u8) -> Result<Self> {
        Self::new(j)
    }
}

impl From<Polarization> for u8 {
    fn from(j: Polarization) -> Self {
        j.0
    }
}

/// A single eigenfunction label `(k, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveIndex {
    pub k: WaveVector,
    pub j: Polarization,
}

impl WaveIndex {
    pub fn new(k: [i32; 3], j: u8) -> Result<Self> {
        Ok(Self {
            k: WaveVector::new(k)?,
            j: Polarization::new(j)?,
        })
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(a: [f64; 3]) -> [f64; 3] {
    let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / r, a[1] / r, a[2] / r]
}

/// The orthonormal frame `(v₁, v₂)` spanning the plane orthogonal to `k`.
///
/// `v₁ = normalize(k × e)` with `e` the first standard axis not parallel to
/// `k`, and `v₂ = normalize(k × v₁)`.
pub fn basis_pair(k: [i32; 3]) -> Result<([f64; 3], [f64; 3])> {
    if k == [0, 0, 0] {
        return Err(Error::InvalidWaveVector(k));
    }
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let axis = (0..3)
        .find(|&i| {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            cross(kf, e).iter().any(|&c| c != 0.0)
        })
        .expect("a nonzero vector is parallel to at most one axis");
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let v1 = normalized(cross(kf, e));
    let v2 = normalized(cross(kf, v1));
    Ok((v1, v2))
}

/// All wave vectors of Z³₊ with |k| ≤ n, in lexicographic order of
/// `(k₁, k₂, k₃)`.
pub fn modes_within(n: u32) -> Vec<WaveVector> {
    let n = n as i32;
    let r2 = (n as i64) * (n as i64);
    let mut out = Vec::new();
    for k1 in 0..=n {
        for k2 in -n..=n {
            for k3 in -n..=n {
                let k = [k1, k2, k3];
                let q = (k1 as i64).pow(2) + (k2 as i64).pow(2) + (k3 as i64).pow(2);
                if q <= r2 && half_space_contains(k) {
                    out.push(WaveVector(k));
                }
            }
        }
    }
    out
}
