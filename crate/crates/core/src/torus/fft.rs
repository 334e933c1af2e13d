//! Three-dimensional FFTs specialised for band-limited fields.
//!
//! Grids are stored in the *native* layout: the point `(i0, i1, i2)` lives at
//! `(i1 * N + i2) * N + i0`, i.e. the first axis is contiguous. Spectral cubes
//! hold wave numbers `k ∈ [-b, b]³` at `((k0 + b) * m + (k1 + b)) * m + (k2 + b)`
//! with `m = 2b + 1`. Only the nonzero band is transformed on the way in and
//! only the band is kept on the way out, which saves most of the first two
//! passes on padded grids.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("size", &self.size).finish()
    }
}

#[inline]
fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

impl Fft3 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn points(&self) -> usize {
        self.size * self.size * self.size
    }

    /// Native-layout offset of grid point `(i0, i1, i2)`.
    #[inline]
    pub fn native_index(&self, i: [usize; 3]) -> usize {
        (i[1] * self.size + i[2]) * self.size + i[0]
    }

    /// Evaluates `Σ_k c_k exp(2πi k·x/N)` on the grid from a band-`band` cube.
    pub fn synthesize(&self, band: usize, cube: &[Complex64]) -> Vec<Complex64> {
        let n = self.size;
        let m = 2 * band + 1;
        assert!(m <= n, "band {band} does not fit a grid of size {n}");
        assert_eq!(cube.len(), m * m * m);
        let zero = Complex64::new(0.0, 0.0);
        let b = band as i64;

        // Pass along axis 2 for every (k0, k1) column.
        let mut s1 = vec![zero; m * m * n];
        for a01 in 0..m * m {
            let line = &mut s1[a01 * n..(a01 + 1) * n];
            for a2 in 0..m {
                line[wrap(a2 as i64 - b, n)] = cube[a01 * m + a2];
            }
        }
        self.inverse.process(&mut s1);

        // Pass along axis 1 for every (k0, i2).
        let mut s2 = vec![zero; m * n * n];
        for a0 in 0..m {
            for a1 in 0..m {
                let pos = wrap(a1 as i64 - b, n);
                let src = &s1[(a0 * m + a1) * n..(a0 * m + a1 + 1) * n];
                for (i2, v) in src.iter().enumerate() {
                    s2[(a0 * n + i2) * n + pos] = *v;
                }
            }
        }
        self.inverse.process(&mut s2);

        // Pass along axis 0 for every (i1, i2): lands in native layout.
        let mut s3 = vec![zero; n * n * n];
        for a0 in 0..m {
            let pos = wrap(a0 as i64 - b, n);
            for i2 in 0..n {
                let src = &s2[(a0 * n + i2) * n..(a0 * n + i2 + 1) * n];
                for (i1, v) in src.iter().enumerate() {
                    s3[(i1 * n + i2) * n + pos] = *v;
                }
            }
        }
        self.inverse.process(&mut s3);
        s3
    }

    /// Discrete Fourier coefficients `N⁻³ Σ_x g(x) exp(−2πi k·x/N)` restricted
    /// to the band `[-band, band]³`.
    pub fn analyze(&self, band: usize, grid: &[Complex64]) -> Vec<Complex64> {
        let n = self.size;
        let m = 2 * band + 1;
        assert!(m <= n, "band {band} does not fit a grid of size {n}");
        assert_eq!(grid.len(), n * n * n);
        let zero = Complex64::new(0.0, 0.0);
        let b = band as i64;

        let mut la = grid.to_vec();
        self.forward.process(&mut la);

        let mut lb = vec![zero; m * n * n];
        for a0 in 0..m {
            let pos = wrap(a0 as i64 - b, n);
            for i2 in 0..n {
                let dst = &mut lb[(a0 * n + i2) * n..(a0 * n + i2 + 1) * n];
                for (i1, d) in dst.iter_mut().enumerate() {
                    *d = la[(i1 * n + i2) * n + pos];
                }
            }
        }
        drop(la);
        self.forward.process(&mut lb);

        let mut lc = vec![zero; m * m * n];
        for a0 in 0..m {
            for a1 in 0..m {
                let pos = wrap(a1 as i64 - b, n);
                let dst = &mut lc[(a0 * m + a1) * n..(a0 * m + a1 + 1) * n];
                for (i2, d) in dst.iter_mut().enumerate() {
                    *d = lb[(a0 * n + i2) * n + pos];
                }
            }
        }
        drop(lb);
        self.forward.process(&mut lc);

        let scale = 1.0 / (n * n * n) as f64;
        let mut cube = vec![zero; m * m * m];
        for a01 in 0..m * m {
            for a2 in 0..m {
                cube[a01 * m + a2] = lc[a01 * n + wrap(a2 as i64 - b, n)] * scale;
            }
        }
        cube
    }
}

/// Smallest integer `≥ min` whose only prime factors are 2, 3 and 5.
pub fn fft_friendly(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}
