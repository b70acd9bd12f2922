//! Dyadic decomposition of grid fields and the energy flux through wavenumber `2^Q`.
//!
//! Profiles are radial functions of the integer mode `|k|_2`:
//!
//! ```text
//! chi(r) = 1 (r <= 1/2),  0 (r >= 1),  psi(1-r) / (psi(1-r) + psi(r-1/2)) in between,  psi(x) = exp(-1/x)
//! phi(r) = chi(r/2) - chi(r),   phi_q(r) = phi(2^-q r) for q >= 0,   phi_{-1} = chi
//! ```
//!
//! so `sum_{q <= Q} phi_q = chi(2^{-Q-1} r)` telescopes exactly.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::record::TrajectoryRecord;
use crate::scalar::Real;
use crate::spectral::{Grid, PhysicalField, SpectralField};

fn psi<T: Real>(x: T) -> T {
    if x > T::zero() {
        (-x.recip()).exp()
    } else {
        T::zero()
    }
}

/// The smooth cutoff: 1 on `[0, 1/2]`, 0 on `[1, inf)`.
pub fn chi<T: Real>(r: T) -> T {
    let half = T::lit(0.5);
    if r <= half {
        T::one()
    } else if r >= T::one() {
        T::zero()
    } else {
        let a = psi(T::one() - r);
        a / (a + psi(r - half))
    }
}

/// `chi(r/2) - chi(r)`, supported on `(1/2, 2)`.
pub fn phi<T: Real>(r: T) -> T {
    chi(r * T::lit(0.5)) - chi(r)
}

fn pow2<T: Real>(q: i32) -> T {
    T::lit(2.0).powi(q)
}

/// `phi_q(r)`; `q = -1` is the low-frequency block `chi`.
pub fn band_multiplier<T: Real>(q: i32, r: T) -> T {
    if q < 0 {
        chi(r)
    } else {
        phi(r * pow2::<T>(-q))
    }
}

/// `chi(2^{-Q-1} r) = sum_{q=-1}^{Q} phi_q(r)`.
pub fn low_pass_multiplier<T: Real>(big_q: i32, r: T) -> T {
    chi(r * pow2::<T>(-big_q - 1))
}

/// Multiplier tables for one grid, indexed by band `q = -1..=Q_max`.
#[derive(Debug)]
pub struct DyadicProfile<T: Real> {
    grid: Arc<Grid<T>>,
    bands: Vec<Vec<T>>,
    low: Vec<Vec<T>>,
}

impl<T: Real> DyadicProfile<T> {
    pub fn new(grid: &Arc<Grid<T>>) -> Self {
        let qmax = grid.domain().max_band();
        let table = |f: &dyn Fn(T) -> T| (0..grid.len()).map(|idx| f(grid.radius(idx))).collect::<Vec<T>>();
        let bands = (-1..=qmax).map(|q| table(&|r| band_multiplier(q, r))).collect();
        let low = (-1..=qmax).map(|q| table(&|r| low_pass_multiplier(q, r))).collect();
        Self {
            grid: grid.clone(),
            bands,
            low,
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn max_band(&self) -> i32 {
        self.bands.len() as i32 - 2
    }

    /// Band indices `-1..=Q_max`.
    pub fn band_range(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.max_band()
    }

    fn slot(&self, q: i32) -> Result<usize> {
        if q < -1 {
            return usage(format!("band index must be at least -1, got {q}"));
        }
        Ok((q + 1) as usize)
    }

    /// `Delta_q theta`. Bands above `Q_max` are empty on this grid.
    pub fn project(&self, theta: &SpectralField<T>, q: i32) -> Result<SpectralField<T>> {
        theta.grid().check_same(&self.grid)?;
        let s = self.slot(q)?;
        Ok(match self.bands.get(s) {
            Some(t) => theta.map_symbol(|idx| t[idx]),
            None => SpectralField::zeros(&self.grid),
        })
    }

    /// `theta_{<=Q}`; the identity once `Q >= Q_max`.
    pub fn low_pass(&self, theta: &SpectralField<T>, big_q: i32) -> Result<SpectralField<T>> {
        theta.grid().check_same(&self.grid)?;
        let s = self.slot(big_q)?;
        Ok(match self.low.get(s) {
            Some(t) => theta.map_symbol(|idx| t[idx]),
            None => theta.clone(),
        })
    }

    fn low_table(&self, big_q: i32) -> Option<&[T]> {
        self.low.get((big_q + 1) as usize).map(Vec::as_slice)
    }

    /// `||Delta_q theta||_2^2` for every band.
    pub fn band_spectrum(&self, theta: &SpectralField<T>) -> Vec<T> {
        let l2 = theta.domain().length().powi(2);
        self.bands
            .iter()
            .map(|t| l2 * theta.coeffs().iter().zip(t).map(|(c, &m)| m * m * c.norm_sqr()).sum::<T>())
            .collect()
    }

    /// `Pi_Q` for every band index, from one alias-free product.
    pub fn flux_profile(&self, theta: &SpectralField<T>) -> Result<Vec<T>> {
        theta.grid().check_same(&self.grid)?;
        let (p1, p2) = padded_product(theta)?;
        let (g1, g2) = theta.gradient();
        let weight: Vec<T> = (0..self.grid.len())
            .map(|i| dot(p1.coeffs()[i], g1.coeffs()[i]) + dot(p2.coeffs()[i], g2.coeffs()[i]))
            .collect();
        let l2 = theta.domain().length().powi(2);
        Ok(self
            .low
            .iter()
            .map(|t| l2 * weight.iter().zip(t).map(|(&w, &m)| m * m * w).sum::<T>())
            .collect())
    }

    /// Flux through `2^Q` with its decomposition; see [`FluxReport`].
    pub fn flux(&self, theta: &SpectralField<T>, big_q: i32) -> Result<FluxReport> {
        theta.grid().check_same(&self.grid)?;
        self.slot(big_q)?;
        if !theta.is_zero_mean() {
            return usage("flux needs a zero-mean field");
        }
        let ones = vec![T::one(); self.grid.len()];
        let chi_q = self.low_table(big_q).unwrap_or(&ones);
        let low = |f: &SpectralField<T>| f.map_symbol(|i| chi_q[i]);
        let high = |f: &SpectralField<T>| f.map_symbol(|i| T::one() - chi_q[i]);

        let (u1, u2) = theta.riesz_perp()?;
        let theta_low = low(theta);
        let (gl1, gl2) = theta_low.gradient();

        // direct: integral of (u theta) . grad (theta_{<=Q})_{<=Q}
        let (gg1, gg2) = low(&theta_low).gradient();
        let direct = triple_integral(theta, (&u1, &u2), (&gg1, &gg2))?;

        // (u theta)_{<=Q} . grad theta_{<=Q} by Parseval
        let (p1, p2) = padded_product(theta)?;
        let product_form = low(&p1).inner(&gl1)? + low(&p2).inner(&gl2)?;

        let low_low = triple_integral(&theta_low, (&low(&u1), &low(&u2)), (&gl1, &gl2))?;
        let high_high = triple_integral(&high(theta), (&high(&u1), &high(&u2)), (&gl1, &gl2))?;
        let r_q_term = product_form - low_low + high_high;

        let ut_norm = (p1.l2().powi(2) + p2.l2().powi(2)).sqrt();
        let grad_low = (gl1.l2().powi(2) + gl2.l2().powi(2)).sqrt();
        let scale = ut_norm * grad_low;
        Ok(FluxReport {
            t: None,
            q: big_q,
            pi_q: direct.as_f64(),
            r_q_term: r_q_term.as_f64(),
            hh_term: high_high.as_f64(),
            ll_term: low_low.as_f64(),
            identity_defect: (direct - (r_q_term - high_high)).abs().as_f64(),
            scale: scale.as_f64(),
        })
    }
}

fn dot<T: Real>(a: Complex<T>, b: Complex<T>) -> T {
    a.re * b.re + a.im * b.im
}

/// Coefficients of `u theta` on the base lattice, computed without aliasing.
fn padded_product<T: Real>(theta: &SpectralField<T>) -> Result<(SpectralField<T>, SpectralField<T>)> {
    let (u1, u2) = theta.riesz_perp()?;
    let (pu1, pu2) = SpectralField::to_physical_pair(&u1.pad(), &u2.pad())?;
    let pt = theta.pad().to_physical();
    let a = pu1.mul(&pt)?;
    let b = pu2.mul(&pt)?;
    let (s1, s2) = PhysicalField::to_spectral_pair(&a, &b)?;
    Ok((s1.truncate_to(theta.grid()), s2.truncate_to(theta.grid())))
}

/// `integral a (v . w) dx` by quadrature on the padded grid, which is exact for
/// products of three fields resolved on the base grid.
fn triple_integral<T: Real>(
    a: &SpectralField<T>,
    v: (&SpectralField<T>, &SpectralField<T>),
    w: (&SpectralField<T>, &SpectralField<T>),
) -> Result<T> {
    let (v1, v2) = SpectralField::to_physical_pair(&v.0.pad(), &v.1.pad())?;
    let (w1, w2) = SpectralField::to_physical_pair(&w.0.pad(), &w.1.pad())?;
    let pa = a.pad().to_physical();
    let area = pa.domain().cell_area();
    let mut acc = T::zero();
    for i in 0..pa.values().len() {
        acc += pa.values()[i] * (v1.values()[i] * w1.values()[i] + v2.values()[i] * w2.values()[i]);
    }
    Ok(acc * area)
}

/// `Pi_Q` and the pieces of `(u theta)_{<=Q} = r_Q - u_{>Q} theta_{>Q} + u_{<=Q} theta_{<=Q}`,
/// each integrated against `grad theta_{<=Q}`.
///
/// `pi_q` is computed directly; `r_q_term` comes from the identity using the
/// alias-free product, so `pi_q = r_q_term - hh_term` is a genuine cross-check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    #[serde(rename = "Q")]
    pub q: i32,
    #[serde(rename = "pi_Q")]
    pub pi_q: f64,
    #[serde(rename = "rQ_term")]
    pub r_q_term: f64,
    pub hh_term: f64,
    /// `integral u_{<=Q} theta_{<=Q} . grad theta_{<=Q}`, zero up to round-off.
    pub ll_term: f64,
    pub identity_defect: f64,
    /// `||u theta||_2 ||grad theta_{<=Q}||_2`, the natural size of every term.
    pub scale: f64,
}

impl FluxReport {
    pub fn identity_holds(&self, rel: f64) -> bool {
        self.identity_defect <= rel * self.scale.max(f64::MIN_POSITIVE)
    }
}

pub fn project<T: Real>(theta: &SpectralField<T>, q: i32) -> Result<SpectralField<T>> {
    DyadicProfile::new(theta.grid()).project(theta, q)
}

pub fn low_pass<T: Real>(theta: &SpectralField<T>, big_q: i32) -> Result<SpectralField<T>> {
    DyadicProfile::new(theta.grid()).low_pass(theta, big_q)
}

pub fn flux<T: Real>(theta: &SpectralField<T>, big_q: i32) -> Result<FluxReport> {
    DyadicProfile::new(theta.grid()).flux(theta, big_q)
}

/// `(q, ||Delta_q theta||^2)` for `q = -1..=Q_max`.
pub fn band_spectrum<T: Real>(theta: &SpectralField<T>) -> Vec<(i32, T)> {
    let d = DyadicProfile::new(theta.grid());
    d.band_range().zip(d.band_spectrum(theta)).collect()
}

/// All bands `theta_q` with their energies.
#[derive(Clone, Debug)]
pub struct BandDecomposition<T: Real> {
    pub bands: Vec<(i32, SpectralField<T>)>,
    pub energies: Vec<T>,
}

impl<T: Real> BandDecomposition<T> {
    pub fn new(theta: &SpectralField<T>) -> Result<Self> {
        let d = DyadicProfile::new(theta.grid());
        let bands = d
            .band_range()
            .map(|q| Ok((q, d.project(theta, q)?)))
            .collect::<Result<Vec<_>>>()?;
        let energies = bands.iter().map(|(_, b)| b.l2().powi(2)).collect();
        Ok(Self { bands, energies })
    }

    pub fn reconstruct(&self) -> Result<SpectralField<T>> {
        let mut it = self.bands.iter();
        let first = it.next().expect("at least one band").1.clone();
        it.try_fold(first, |acc, (_, b)| acc.add(b))
    }
}

fn trapezoid<T: Real>(ts: &[T], ys: &[T]) -> T {
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| T::lit(0.5) * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

fn window<T: Real>(rec: &TrajectoryRecord<T>, t0: T, t1: T, need: fn(&crate::record::Sample<T>) -> bool, what: &str) -> Result<(usize, usize)> {
    if !(t0 < t1) {
        return usage(format!("need t0 < T, got {t0} and {t1}"));
    }
    let i = rec.sample_index(t0)?;
    let j = rec.sample_index(t1)?;
    if j <= i {
        return usage("time window contains fewer than two samples");
    }
    if !rec.samples[i..=j].iter().all(need) {
        return usage(format!("record lacks {what} on the requested window"));
    }
    Ok((i, j))
}

/// `sum_p 2^{-|p-Q|/2} int 2^p ||theta_p||^2 dt` over every recorded band.
pub fn flux_bound_rhs<T: Real>(rec: &TrajectoryRecord<T>, big_q: i32, t0: T, t1: T) -> Result<T> {
    let (i, j) = window(rec, t0, t1, |s| !s.bands.is_empty(), "band energies")?;
    let s = &rec.samples[i..=j];
    let ts: Vec<T> = s.iter().map(|x| x.t).collect();
    let nb = s[0].bands.len();
    let mut total = T::zero();
    for b in 0..nb {
        let p = b as i32 - 1;
        let ys: Vec<T> = s.iter().map(|x| x.bands[b]).collect();
        let weight = pow2::<T>(p) * T::lit(2f64.powf(-((p - big_q).abs() as f64) / 2.0));
        total += weight * trapezoid(&ts, &ys);
    }
    Ok(total)
}

/// `int_{t0}^{T} Pi_Q dt` from the recorded flux profiles.
pub fn flux_integral<T: Real>(rec: &TrajectoryRecord<T>, big_q: i32, t0: T, t1: T) -> Result<T> {
    let (i, j) = window(rec, t0, t1, |s| !s.flux.is_empty(), "flux profiles")?;
    let s = &rec.samples[i..=j];
    let slot = (big_q + 1).max(0) as usize;
    let ts: Vec<T> = s.iter().map(|x| x.t).collect();
    let ys: Vec<T> = s.iter().map(|x| *x.flux.get(slot).unwrap_or(x.flux.last().unwrap())).collect();
    Ok(trapezoid(&ts, &ys))
}

/// `max_Q |int Pi_Q| / rhs(Q)` over the recorded bands, with the per-`Q` ratios.
pub fn fit_flux_constant<T: Real>(rec: &TrajectoryRecord<T>, t0: T, t1: T) -> Result<(T, Vec<(i32, T)>)> {
    let nb = rec.samples.first().map_or(0, |s| s.flux.len()) as i32;
    let mut ratios = Vec::new();
    for q in -1..nb - 1 {
        let rhs = flux_bound_rhs(rec, q, t0, t1)?;
        let lhs = flux_integral(rec, q, t0, t1)?.abs();
        if rhs > T::zero() {
            ratios.push((q, lhs / rhs));
        }
    }
    let c = ratios.iter().map(|r| r.1).fold(T::zero(), T::max);
    Ok((c, ratios))
}

/// `{t, q, energy}` row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandEnergyRecord {
    pub t: f64,
    pub q: i32,
    pub energy: f64,
}

/// `{t, Q, pi_Q, rQ_term, hh_term, bound_rhs}` row for a time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxSeriesRecord {
    pub t: f64,
    #[serde(rename = "Q")]
    pub q: i32,
    #[serde(rename = "pi_Q")]
    pub pi_q: f64,
    /// Present only when the row comes from a full [`FluxReport`].
    #[serde(rename = "rQ_term", default, skip_serializing_if = "Option::is_none")]
    pub r_q_term: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hh_term: Option<f64>,
    /// [`flux_bound_rhs`] from the first sample to `t`.
    pub bound_rhs: f64,
}
