//! Torus geometry, real/spectral transforms and the Fourier multipliers used by the solver.
//!
//! Coefficients are stored on the full `N x N` FFT lattice, flattened as
//! `i1 * N + i2`, where `i1` indexes the first coordinate. The normalization is
//!
//! ```text
//! f(x) = sum_k  c_k exp(2 pi i k.x / L),      c_k = (1/L^2) * integral f(x) exp(-2 pi i k.x / L) dx
//! ```
//!
//! so that `||f||_2^2 = L^2 sum_k |c_k|^2`. Multipliers are evaluated on the
//! integer mode index `k`; the physical wavenumber is `(2 pi / L) k`.
//!
//! The Nyquist lines (`i1 = N/2` or `i2 = N/2`) carry real, sign-ambiguous
//! modes. Odd multipliers (derivatives, Riesz transforms) annihilate them so
//! that their outputs stay real.

mod field;
mod ops;

pub use field::{PhysicalField, SpectralField};

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{usage, Error, Result};
use crate::scalar::Real;

/// Side length and resolution of the periodic box `[0, L]^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T> {
    length: T,
    n: usize,
}

impl<T: Real> Domain<T> {
    pub fn new(length: T, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > T::zero()) {
            return usage(format!("domain length must be positive and finite, got {length}"));
        }
        if n < 16 || n % 2 != 0 {
            return usage(format!("grid size must be even and at least 16, got {n}"));
        }
        Ok(Self { length, n })
    }

    /// The `2 pi` box, the natural choice for unit integer wavenumbers.
    pub fn periodic_2pi(n: usize) -> Result<Self> {
        Self::new(T::lit(2.0) * T::PI(), n)
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `2 pi / L`: physical wavenumber of the unit mode.
    pub fn wavenumber_unit(&self) -> T {
        T::lit(2.0) * T::PI() / self.length
    }

    pub fn cell_area(&self) -> T {
        let h = self.length / T::from_count(self.n);
        h * h
    }

    /// Largest dyadic index whose band can intersect the grid modes.
    pub fn max_band(&self) -> i32 {
        let kmax = self.n as f64 * std::f64::consts::FRAC_1_SQRT_2;
        kmax.log2().ceil() as i32
    }
}

impl<T: Real> fmt::Display for Domain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L = {}, N = {}", self.length, self.n)
    }
}

/// A domain together with its FFT plans and mode tables.
///
/// Shared between fields through an `Arc`; everything inside is immutable.
pub struct Grid<T: Real> {
    domain: Domain<T>,
    modes: Vec<i64>,
    radius: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    padded: OnceLock<Arc<Grid<T>>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("domain", &self.domain).finish()
    }
}

impl<T: Real> Grid<T> {
    pub fn new(domain: Domain<T>) -> Arc<Self> {
        Arc::new(Self::build(domain.length, domain.n))
    }

    fn build(length: T, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let modes: Vec<i64> = (0..n)
            .map(|i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
            .collect();
        let mut radius = Vec::with_capacity(n * n);
        for &k1 in &modes {
            for &k2 in &modes {
                radius.push(T::from_int(k1 * k1 + k2 * k2).sqrt());
            }
        }
        Self {
            domain: Domain { length, n },
            modes,
            radius,
            forward,
            inverse,
            padded: OnceLock::new(),
        }
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n
    }

    pub fn len(&self) -> usize {
        self.domain.n * self.domain.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed integer mode of FFT index `i`; the Nyquist index maps to `+N/2`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        self.modes[i]
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        2 * i == self.domain.n
    }

    /// Integer mode pair of a flattened index.
    #[inline]
    pub fn mode_pair(&self, idx: usize) -> (i64, i64) {
        let n = self.domain.n;
        (self.modes[idx / n], self.modes[idx % n])
    }

    /// Euclidean magnitude `|k|_2` of the integer mode at a flattened index.
    #[inline]
    pub fn radius(&self, idx: usize) -> T {
        self.radius[idx]
    }

    /// Flattened index of an integer mode, if it lies on the lattice.
    pub fn index_of(&self, k: (i64, i64)) -> Option<usize> {
        let n = self.domain.n as i64;
        let wrap = |m: i64| -> Option<usize> {
            if m.abs() > n / 2 {
                None
            } else {
                Some(m.rem_euclid(n) as usize)
            }
        };
        Some(wrap(k.0)? * self.domain.n + wrap(k.1)?)
    }

    /// Flattened index of `-k` for the mode stored at `idx`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.domain.n;
        let (i1, i2) = (idx / n, idx % n);
        ((n - i1) % n) * n + (n - i2) % n
    }

    /// True when the index lies on one of the two Nyquist lines.
    #[inline]
    pub fn on_nyquist_line(&self, idx: usize) -> bool {
        let n = self.domain.n;
        self.is_nyquist(idx / n) || self.is_nyquist(idx % n)
    }

    /// The companion grid with `M >= 3N/2` points per side used for alias-free products.
    pub fn padded(&self) -> Arc<Grid<T>> {
        self.padded
            .get_or_init(|| {
                let mut m = (3 * self.domain.n).div_ceil(2);
                m += m % 2;
                Arc::new(Self::build(self.domain.length, m))
            })
            .clone()
    }

    pub(crate) fn check_same(&self, other: &Grid<T>) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch(format!("{} vs {}", self.domain, other.domain)))
        }
    }

    /// Unnormalized 2D DFT in place (`inverse` selects the `+i` sign).
    pub(crate) fn fft2(&self, buf: &mut [Complex<T>], inverse: bool) {
        let n = self.domain.n;
        debug_assert_eq!(buf.len(), n * n);
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, n);
    }
}

fn transpose<T: Copy>(buf: &mut [T], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
