//! Time-independent forcing and seeded random fields.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::checkpoint;
use crate::error::{usage, Result};
use crate::scalar::Real;
use crate::spectral::{Grid, SpectralField};

#[derive(Clone, Debug, PartialEq)]
pub enum ForcingKind {
    /// `amplitude * cos(2 pi k.x / L)`.
    SingleMode { k: (i64, i64) },
    /// Gaussian coefficients on the annulus `k_lo <= |k|_2 <= k_hi`, rescaled so `max |f| = amplitude`.
    BandLimitedRandom { k_lo: f64, k_hi: f64, seed: u64 },
    /// Spectrum read from a checkpoint file, rescaled so `max |f| = amplitude`.
    FromFile { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSpec<T> {
    pub kind: ForcingKind,
    pub amplitude: T,
    /// Exponent `p > 2` at which `||f||_p` is reported.
    pub target_p: T,
}

impl<T: Real> ForcingSpec<T> {
    pub fn single_mode(k: (i64, i64), amplitude: T) -> Self {
        Self {
            kind: ForcingKind::SingleMode { k },
            amplitude,
            target_p: T::lit(4.0),
        }
    }

    pub fn random_band(k_lo: f64, k_hi: f64, seed: u64, amplitude: T) -> Self {
        Self {
            kind: ForcingKind::BandLimitedRandom { k_lo, k_hi, seed },
            amplitude,
            target_p: T::lit(4.0),
        }
    }

    pub fn zero() -> Self {
        Self::single_mode((1, 0), T::zero())
    }
}

/// A forcing field and the norms the estimates are stated in.
#[derive(Clone, Debug)]
pub struct Forcing<T: Real> {
    pub field: SpectralField<T>,
    pub p: T,
    pub l2: T,
    pub lp: T,
    pub h_minus_half: T,
}

impl<T: Real> Forcing<T> {
    pub fn from_field(field: SpectralField<T>, p: T) -> Result<Self> {
        if !(p > T::lit(2.0)) {
            return usage(format!("forcing.target_p must exceed 2, got {p}"));
        }
        let field = field.with_zero_mean();
        Ok(Self {
            l2: field.l2(),
            lp: field.lp(p)?,
            h_minus_half: field.sobolev(T::lit(-0.5))?,
            p,
            field,
        })
    }

    pub fn zero(grid: &Arc<Grid<T>>) -> Self {
        Self::from_field(SpectralField::zeros(grid), T::lit(4.0)).expect("zero forcing is valid")
    }

    pub fn is_zero(&self) -> bool {
        self.l2 == T::zero()
    }
}

pub fn make_forcing<T: Real>(spec: &ForcingSpec<T>, grid: &Arc<Grid<T>>) -> Result<Forcing<T>> {
    if !(spec.target_p > T::lit(2.0)) {
        return usage(format!("forcing.target_p must exceed 2, got {}", spec.target_p));
    }
    if !spec.amplitude.is_finite() {
        return usage("forcing.amplitude must be finite");
    }
    let field = match &spec.kind {
        ForcingKind::SingleMode { k } => {
            if *k == (0, 0) {
                return usage("forcing.mode must be nonzero (the forcing has zero mean)");
            }
            SpectralField::cosine(grid, *k, spec.amplitude)?
        }
        ForcingKind::BandLimitedRandom { k_lo, k_hi, seed } => {
            let f = random_band_field(grid, *k_lo, *k_hi, *seed)?;
            rescale_to_peak(f, spec.amplitude)
        }
        ForcingKind::FromFile { path } => {
            let chk = checkpoint::read(path)?;
            let f = chk.to_field(grid)?;
            rescale_to_peak(f, spec.amplitude)
        }
    };
    Forcing::from_field(field, spec.target_p)
}

fn rescale_to_peak<T: Real>(f: SpectralField<T>, amplitude: T) -> SpectralField<T> {
    let peak = f.linf();
    if peak == T::zero() {
        f
    } else {
        f.scale(amplitude / peak)
    }
}

/// Zero-mean real field with independent standard Gaussian coefficients on
/// `k_lo <= |k|_2 <= k_hi` (Nyquist lines excluded). Deterministic in `seed`.
pub fn random_band_field<T: Real>(grid: &Arc<Grid<T>>, k_lo: f64, k_hi: f64, seed: u64) -> Result<SpectralField<T>> {
    if !(k_lo.is_finite() && k_hi.is_finite() && k_lo <= k_hi && k_hi > 0.0) {
        return usage(format!("invalid wavenumber band [{k_lo}, {k_hi}]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid);
    let mut filled = 0usize;
    for idx in 1..grid.len() {
        let (k1, k2) = grid.mode_pair(idx);
        // one representative per conjugate pair
        if !(k1 > 0 || (k1 == 0 && k2 > 0)) || grid.on_nyquist_line(idx) {
            continue;
        }
        let r = grid.radius(idx).as_f64();
        if r < k_lo || r > k_hi {
            continue;
        }
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        f.add_mode_pair((k1, k2), Complex::new(T::lit(re), T::lit(im)))?;
        filled += 1;
    }
    if filled == 0 {
        return usage(format!("wavenumber band [{k_lo}, {k_hi}] contains no grid modes"));
    }
    Ok(f.with_zero_mean())
}

/// [`random_band_field`] rescaled to a prescribed `L^2` norm.
pub fn random_initial_state<T: Real>(
    grid: &Arc<Grid<T>>,
    k_lo: f64,
    k_hi: f64,
    l2: T,
    seed: u64,
) -> Result<SpectralField<T>> {
    let f = random_band_field(grid, k_lo, k_hi, seed)?;
    let norm = f.l2();
    Ok(f.scale(l2 / norm))
}
