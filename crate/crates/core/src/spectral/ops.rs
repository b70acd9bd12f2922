use num_complex::Complex;

use super::{PhysicalField, SpectralField};
use crate::error::{usage, Result};
use crate::scalar::Real;

impl<T: Real> SpectralField<T> {
    /// `Lambda^s f`: multiplies mode `k` by `((2 pi / L) |k|_2)^s` and clears the mean.
    pub fn fractional_power(&self, s: T) -> Result<Self> {
        if s < T::zero() && !self.is_zero_mean() {
            return usage(format!("Lambda^{s} is undefined on a field with nonzero mean"));
        }
        let grid = self.grid().clone();
        let w = self.domain().wavenumber_unit();
        let mut out = self.map_symbol(|idx| {
            if idx == 0 {
                T::zero()
            } else {
                (w * grid.radius(idx)).powf(s)
            }
        });
        out.remove_mean();
        Ok(out)
    }

    /// Velocity `u = R^perp theta = Lambda^{-1}(-d2 theta, d1 theta)`.
    ///
    /// Nyquist lines are annihilated in both components, which keeps the
    /// output exactly divergence free and real.
    pub fn riesz_perp(&self) -> Result<(Self, Self)> {
        if !self.is_zero_mean() {
            return usage("the Riesz velocity needs a zero-mean scalar");
        }
        let grid = self.grid().clone();
        let mut u1 = Self::zeros(&grid);
        let mut u2 = Self::zeros(&grid);
        {
            let (c1, c2) = (u1.coeffs_mut(), u2.coeffs_mut());
            for (idx, &c) in self.coeffs().iter().enumerate() {
                if idx == 0 || grid.on_nyquist_line(idx) {
                    continue;
                }
                let (k1, k2) = grid.mode_pair(idx);
                let inv = T::one() / grid.radius(idx);
                // i * (-k2, k1) / |k| * c
                let ic = Complex::new(-c.im, c.re) * inv;
                c1[idx] = ic * (-T::from_int(k2));
                c2[idx] = ic * T::from_int(k1);
            }
        }
        u1.remove_mean();
        u2.remove_mean();
        Ok((u1, u2))
    }

    /// `(d1 f, d2 f)`, with the derivative along a Nyquist direction set to zero.
    pub fn gradient(&self) -> (Self, Self) {
        let grid = self.grid().clone();
        let n = grid.n();
        let w = self.domain().wavenumber_unit();
        let mut g1 = Self::zeros(&grid);
        let mut g2 = Self::zeros(&grid);
        {
            let (c1, c2) = (g1.coeffs_mut(), g2.coeffs_mut());
            for (idx, &c) in self.coeffs().iter().enumerate() {
                let (i1, i2) = (idx / n, idx % n);
                let ic = Complex::new(-c.im, c.re) * w;
                if !grid.is_nyquist(i1) {
                    c1[idx] = ic * T::from_int(grid.mode(i1));
                }
                if !grid.is_nyquist(i2) {
                    c2[idx] = ic * T::from_int(grid.mode(i2));
                }
            }
        }
        g1.remove_mean();
        g2.remove_mean();
        (g1, g2)
    }

    /// Two-thirds rule: zeroes modes with `max(|k1|, |k2|) > N/3`.
    pub fn dealias(&self) -> Self {
        let grid = self.grid().clone();
        let n = grid.n() as i64;
        self.map_symbol(|idx| {
            let (k1, k2) = grid.mode_pair(idx);
            if 3 * k1.abs().max(k2.abs()) > n {
                T::zero()
            } else {
                T::one()
            }
        })
    }

    /// True if every mode outside the two-thirds box is exactly zero.
    pub fn is_dealiased(&self) -> bool {
        let grid = self.grid();
        let n = grid.n() as i64;
        self.coeffs().iter().enumerate().all(|(idx, c)| {
            let (k1, k2) = grid.mode_pair(idx);
            3 * k1.abs().max(k2.abs()) <= n || (c.re == T::zero() && c.im == T::zero())
        })
    }

    /// `||f||_2` with `||f||_2^2 = integral f^2 dx`, by Parseval.
    pub fn l2(&self) -> T {
        self.domain().length() * self.coeff_norm()
    }

    /// `(sum_k ((2 pi/L)|k|)^{2s} |c_k|^2 L^2)^(1/2)`. The mean contributes only for `s = 0`.
    pub fn sobolev(&self, s: T) -> Result<T> {
        if s < T::zero() && !self.is_zero_mean() {
            return usage(format!("the H^{s} norm needs a zero-mean field"));
        }
        Ok(self.sobolev_sq(s).sqrt())
    }

    pub(crate) fn sobolev_sq(&self, s: T) -> T {
        let grid = self.grid();
        let w = self.domain().wavenumber_unit();
        let l = self.domain().length();
        let two_s = s + s;
        let mut acc = if s == T::zero() { self.coeffs()[0].norm_sqr() } else { T::zero() };
        for (idx, c) in self.coeffs().iter().enumerate().skip(1) {
            acc += (w * grid.radius(idx)).powf(two_s) * c.norm_sqr();
        }
        l * l * acc
    }

    /// `||Lambda^{1/2} f||_2^2`, the dissipation density.
    pub fn half_derivative_sq(&self) -> T {
        let grid = self.grid();
        let w = self.domain().wavenumber_unit();
        let l = self.domain().length();
        let acc: T = self.coeffs().iter().enumerate().skip(1).map(|(idx, c)| grid.radius(idx) * c.norm_sqr()).sum();
        w * l * l * acc
    }

    pub fn linf(&self) -> T {
        self.to_physical().linf()
    }

    pub fn lp(&self, p: T) -> Result<T> {
        self.to_physical().lp(p)
    }
}

impl<T: Real> PhysicalField<T> {
    /// Maximum absolute grid value.
    pub fn linf(&self) -> T {
        self.values().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Uniform-grid quadrature of `|f|^p`, then the `p`-th root.
    pub fn lp(&self, p: T) -> Result<T> {
        if !(p >= T::one()) {
            return usage(format!("L^p norm needs p >= 1, got {p}"));
        }
        let area = self.domain().cell_area();
        let s: T = self.values().iter().map(|v| v.abs().powf(p)).sum();
        Ok((s * area).powf(T::one() / p))
    }

    /// Grid quadrature of `f^2`, square-rooted.
    pub fn l2(&self) -> T {
        let area = self.domain().cell_area();
        (self.values().iter().map(|&v| v * v).sum::<T>() * area).sqrt()
    }

    /// Grid quadrature of `f g`.
    pub fn integral_product(&self, other: &Self) -> Result<T> {
        self.grid().check_same(other.grid())?;
        let area = self.domain().cell_area();
        Ok(self.values().iter().zip(other.values()).map(|(&a, &b)| a * b).sum::<T>() * area)
    }

    pub fn integral(&self) -> T {
        self.values().iter().copied().sum::<T>() * self.domain().cell_area()
    }
}
