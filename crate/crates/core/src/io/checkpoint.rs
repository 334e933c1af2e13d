//! Binary checkpoints: `"PSNS"`, version, `n`, `L`, coefficients, rng blob, time.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::stochastic::NoiseStream;
use crate::torus::{SpectralField, Torus};

pub const MAGIC: &[u8; 4] = b"PSNS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n: u32,
    pub length: f64,
    /// Lexicographic `(k₁, k₂, k₃, j)` order.
    pub coeffs: Vec<f64>,
    pub rng: Vec<u8>,
    pub time: f64,
}

impl Checkpoint {
    pub fn capture(state: &SpectralField, rng: &NoiseStream, time: f64) -> Self {
        let t = state.torus();
        Self { n: t.cutoff(), length: t.length(), coeffs: state.coeffs().to_vec(), rng: rng.to_bytes(), time }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.coeffs.len() + self.rng.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.length.to_le_bytes());
        out.extend_from_slice(&(self.coeffs.len() as u32).to_le_bytes());
        for c in &self.coeffs {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&(self.rng.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.rng);
        out.extend_from_slice(&self.time.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let n = r.u32()?;
        let length = r.f64()?;
        let count = r.u32()? as usize;
        let coeffs = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let rng_len = r.u32()? as usize;
        let rng = r.take(rng_len)?.to_vec();
        let time = r.f64()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { n, length, coeffs, rng, time })
    }

    /// Rebuilds the field on `torus`, which must match the stored `n` and `L`.
    pub fn state(&self, torus: &Arc<Torus>) -> Result<SpectralField> {
        if torus.cutoff() != self.n || torus.length() != self.length {
            return Err(Error::Checkpoint(format!(
                "checkpoint is for n = {}, L = {}, run uses n = {}, L = {}",
                self.n,
                self.length,
                torus.cutoff(),
                torus.length()
            )));
        }
        SpectralField::from_coefficients(torus, self.coeffs.clone())
    }

    pub fn noise_stream(&self) -> Result<NoiseStream> {
        NoiseStream::from_bytes(&self.rng)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}
