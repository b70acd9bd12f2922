use std::sync::Arc;

use num_complex::Complex;

use super::{Domain, Grid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fourier coefficients of a real scalar field on the torus.
///
/// Hermitian symmetry (`c_{-k} = conj(c_k)`) is maintained by every operation
/// in this crate. When `zero_mean` is set the `k = 0` coefficient is exactly zero.
#[derive(Clone, Debug)]
pub struct SpectralField<T: Real> {
    grid: Arc<Grid<T>>,
    coeffs: Vec<Complex<T>>,
    zero_mean: bool,
}

/// Grid samples `f(i1 h, i2 h)`, `h = L / N`, flattened as `i1 * N + i2`.
#[derive(Clone, Debug)]
pub struct PhysicalField<T: Real> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

#[inline]
fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![czero(); grid.len()],
            zero_mean: true,
        }
    }

    /// Wraps raw coefficients. Hermitian symmetry is the caller's responsibility.
    pub fn from_coeffs(grid: &Arc<Grid<T>>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DomainMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        let mut f = Self {
            grid: grid.clone(),
            coeffs,
            zero_mean: false,
        };
        f.zero_mean = f.coeffs[0] == czero();
        Ok(f)
    }

    /// `amplitude * cos(2 pi k.x / L)`.
    pub fn cosine(grid: &Arc<Grid<T>>, k: (i64, i64), amplitude: T) -> Result<Self> {
        let mut f = Self::zeros(grid);
        f.add_mode_pair(k, Complex::new(amplitude * T::lit(0.5), T::zero()))?;
        Ok(f)
    }

    /// `amplitude * sin(2 pi k.x / L)`.
    pub fn sine(grid: &Arc<Grid<T>>, k: (i64, i64), amplitude: T) -> Result<Self> {
        let mut f = Self::zeros(grid);
        f.add_mode_pair(k, Complex::new(T::zero(), -amplitude * T::lit(0.5)))?;
        Ok(f)
    }

    /// Adds `c` at mode `k` and `conj(c)` at `-k`.
    pub fn add_mode_pair(&mut self, k: (i64, i64), c: Complex<T>) -> Result<()> {
        let idx = self
            .grid
            .index_of(k)
            .ok_or_else(|| Error::Usage(format!("mode {k:?} is not on the {} lattice", self.grid.domain())))?;
        if self.grid.on_nyquist_line(idx) {
            return Err(Error::Usage(format!("mode {k:?} lies on a Nyquist line")));
        }
        let conj_idx = self.grid.conjugate_index(idx);
        if conj_idx == idx {
            self.coeffs[idx].re += c.re;
        } else {
            self.coeffs[idx] = self.coeffs[idx] + c;
            self.coeffs[conj_idx] = self.coeffs[conj_idx] + c.conj();
        }
        if idx == 0 {
            self.zero_mean = self.coeffs[0] == czero();
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn domain(&self) -> &Domain<T> {
        self.grid.domain()
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        self.zero_mean = false;
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex<T>> {
        self.coeffs
    }

    /// Coefficient at an integer mode, zero if the mode is off the lattice.
    pub fn mode(&self, k: (i64, i64)) -> Complex<T> {
        self.grid.index_of(k).map_or(czero(), |i| self.coeffs[i])
    }

    pub fn zero_mean_flag(&self) -> bool {
        self.zero_mean
    }

    /// True if the flag is set or the mean coefficient is at round-off level.
    pub fn is_zero_mean(&self) -> bool {
        if self.zero_mean {
            return true;
        }
        let scale = self.coeff_norm();
        self.coeffs[0].norm() <= T::lit(1e4) * T::epsilon() * scale
    }

    /// Sets the mean coefficient to exactly zero.
    pub fn with_zero_mean(mut self) -> Self {
        self.remove_mean();
        self
    }

    pub fn remove_mean(&mut self) {
        self.coeffs[0] = czero();
        self.zero_mean = true;
    }

    /// `(sum_k |c_k|^2)^(1/2)`.
    pub fn coeff_norm(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_coeff(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.norm()))
    }

    /// Largest violation of `c_{-k} = conj(c_k)`.
    pub fn hermitian_defect(&self) -> T {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.conjugate_index(i)] - self.coeffs[i].conj()).norm())
            .fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn to_physical(&self) -> PhysicalField<T> {
        let mut buf = self.coeffs.clone();
        self.grid.fft2(&mut buf, true);
        PhysicalField {
            grid: self.grid.clone(),
            values: buf.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Transforms two real fields with one complex FFT.
    pub fn to_physical_pair(a: &Self, b: &Self) -> Result<(PhysicalField<T>, PhysicalField<T>)> {
        a.check_same(b)?;
        let i = Complex::new(T::zero(), T::one());
        let mut buf: Vec<Complex<T>> = a.coeffs.iter().zip(&b.coeffs).map(|(&x, &y)| x + i * y).collect();
        a.grid.fft2(&mut buf, true);
        let (re, im): (Vec<T>, Vec<T>) = buf.into_iter().map(|c| (c.re, c.im)).unzip();
        Ok((
            PhysicalField { grid: a.grid.clone(), values: re },
            PhysicalField { grid: a.grid.clone(), values: im },
        ))
    }

    /// Pointwise linear combination `a * self + b * other`.
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&x, &y)| x * a + y * b).collect();
        Ok(Self {
            grid: self.grid.clone(),
            coeffs,
            zero_mean: self.zero_mean && other.zero_mean,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lincomb(T::one(), other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lincomb(T::one(), other, -T::one())
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * a).collect(),
            zero_mean: self.zero_mean,
        }
    }

    /// Multiplies coefficient `k` by a real symbol `m(idx)`.
    pub fn map_symbol(&self, mut m: impl FnMut(usize) -> T) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, &c)| c * m(i)).collect();
        let mut out = Self {
            grid: self.grid.clone(),
            coeffs,
            zero_mean: false,
        };
        out.zero_mean = self.zero_mean || out.coeffs[0] == czero();
        out
    }

    /// `L^2` inner product `integral f g dx` via Parseval.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        let l = self.domain().length();
        let s: T = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
        Ok(l * l * s)
    }

    /// Zero-pads onto the companion `3N/2` grid. Nyquist lines are dropped.
    pub fn pad(&self) -> Self {
        let padded = self.grid.padded();
        let mut out = Self::zeros(&padded);
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if self.grid.on_nyquist_line(idx) {
                continue;
            }
            let target = padded.index_of(self.grid.mode_pair(idx)).expect("padded lattice contains the base lattice");
            out.coeffs[target] = c;
        }
        out.zero_mean = self.zero_mean;
        out
    }

    /// Keeps the modes of a padded field that lie strictly inside the base lattice.
    pub fn truncate_to(&self, base: &Arc<Grid<T>>) -> Self {
        let mut out = Self::zeros(base);
        for idx in 0..base.len() {
            if base.on_nyquist_line(idx) {
                continue;
            }
            if let Some(src) = self.grid.index_of(base.mode_pair(idx)) {
                out.coeffs[idx] = self.coeffs[src];
            }
        }
        out.zero_mean = out.coeffs[0] == czero();
        out
    }
}

impl<T: Real> PhysicalField<T> {
    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DomainMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Samples `f(x1, x2)` at the grid nodes.
    pub fn from_fn(grid: &Arc<Grid<T>>, f: impl Fn(T, T) -> T) -> Self {
        let n = grid.n();
        let h = grid.domain().length() / T::from_count(n);
        let mut values = Vec::with_capacity(n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                values.push(f(T::from_count(i1) * h, T::from_count(i2) * h));
            }
        }
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn domain(&self) -> &Domain<T> {
        self.grid.domain()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).collect(),
        })
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_count(self.values.len())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_spectral(&self) -> SpectralField<T> {
        let mut buf: Vec<Complex<T>> = self.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.grid.fft2(&mut buf, false);
        let scale = T::one() / T::from_count(self.grid.len());
        for c in &mut buf {
            *c = *c * scale;
        }
        SpectralField {
            grid: self.grid.clone(),
            coeffs: buf,
            zero_mean: false,
        }
    }

    /// Forward-transforms two real fields with one complex FFT.
    pub fn to_spectral_pair(a: &Self, b: &Self) -> Result<(SpectralField<T>, SpectralField<T>)> {
        a.grid.check_same(&b.grid)?;
        let mut buf: Vec<Complex<T>> = a.values.iter().zip(&b.values).map(|(&x, &y)| Complex::new(x, y)).collect();
        a.grid.fft2(&mut buf, false);
        let scale = T::lit(0.5) / T::from_count(a.grid.len());
        let mut ca = vec![czero(); buf.len()];
        let mut cb = vec![czero(); buf.len()];
        for idx in 0..buf.len() {
            let z = buf[idx];
            let zc = buf[a.grid.conjugate_index(idx)].conj();
            ca[idx] = (z + zc) * scale;
            // (z - zc) / (2i)
            let d = (z - zc) * scale;
            cb[idx] = Complex::new(d.im, -d.re);
        }
        let wrap = |coeffs| SpectralField {
            grid: a.grid.clone(),
            coeffs,
            zero_mean: false,
        };
        Ok((wrap(ca), wrap(cb)))
    }
}
