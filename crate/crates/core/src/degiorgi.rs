//! Level-set truncations and the De Giorgi energies behind the `L^inf` bound.
//!
//! For levels `lambda_k = M (1 - 2^-k)` and windows `[T_k, t0]`, `T_k = t0 (1 - 2^-k)`,
//!
//! ```text
//! U_k = sup_{T_k <= t <= t0} ||theta_k||_2^2 + 2 nu int_{T_k}^{t0} ||Lambda^{1/2} theta_k||_2^2 dt,
//! theta_k = (theta - lambda_k)_+      (or (theta + lambda_k)_- for the lower bound)
//! ```
//!
//! Truncations are taken pointwise on the grid; their spectral norms use the
//! re-transformed field, which is not band-limited, so these quantities carry
//! a resolution-dependent error.

use num_rational::BigRational;
use num_traits::{Num, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::record::{Snapshot, TrajectoryRecord};
use crate::scalar::Real;
use crate::spectral::{PhysicalField, SpectralField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `(theta - lambda)_+`, bounds `theta` from above.
    #[default]
    Plus,
    /// `(theta + lambda)_- = min(theta + lambda, 0)`, bounds `theta` from below.
    Minus,
}

/// Pointwise truncation. The minus branch keeps its sign, so it is nonpositive.
pub fn truncate<T: Real>(theta: &PhysicalField<T>, lambda: T, branch: Branch) -> PhysicalField<T> {
    match branch {
        Branch::Plus => theta.map(|v| (v - lambda).max(T::zero())),
        Branch::Minus => theta.map(|v| (v + lambda).min(T::zero())),
    }
}

/// The part of `theta` the branch bounds: `max theta` or `max(-theta)`.
pub fn branch_extreme<T: Real>(theta: &PhysicalField<T>, branch: Branch) -> T {
    let sign = match branch {
        Branch::Plus => T::one(),
        Branch::Minus => -T::one(),
    };
    theta.values().iter().fold(T::neg_infinity(), |m, &v| m.max(sign * v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelConfig<T> {
    pub m: T,
    /// Highest level index `K`; levels `0..=K` are evaluated.
    pub levels: usize,
    pub t0: T,
    pub nu: T,
    pub p: T,
    pub f_p_norm: T,
    pub branch: Branch,
}

impl<T: Real> LevelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > T::zero()) {
            return usage(format!("level scale M must be positive, got {}", self.m));
        }
        if self.levels < 3 {
            return usage(format!("need at least 3 levels, got {}", self.levels));
        }
        if !(self.t0 > T::zero()) {
            return usage("t0 must be positive");
        }
        if !(self.nu > T::zero()) {
            return usage("nu must be positive");
        }
        if !(self.p > T::lit(2.0)) {
            return usage(format!("p must exceed 2, got {}", self.p));
        }
        if self.f_p_norm < T::zero() {
            return usage("||f||_p must be nonnegative");
        }
        Ok(())
    }

    pub fn lambda(&self, k: usize) -> T {
        self.m * (T::one() - half_pow(k))
    }

    pub fn window_start(&self, k: usize) -> T {
        self.t0 * (T::one() - half_pow(k))
    }

    /// `p' = p / (p - 1)`.
    pub fn p_prime(&self) -> T {
        self.p / (self.p - T::one())
    }
}

fn half_pow<T: Real>(k: usize) -> T {
    T::lit(0.5).powi(k as i32)
}

/// Snapshot times with `per_window` points in each `[T_k, T_{k+1})`, `k < K`,
/// and in the last window `[T_K, t0]`, which ends exactly at `t0`.
pub fn level_snapshot_times<T: Real>(t0: T, levels: usize, per_window: usize) -> Vec<T> {
    let start = |k: usize| t0 * (T::one() - half_pow(k));
    let per = per_window.max(1);
    let mut out = Vec::with_capacity((levels + 1) * per + 1);
    for k in 0..=levels {
        let (a, b) = (start(k), if k == levels { t0 } else { start(k + 1) });
        for j in 0..per {
            out.push(a + (b - a) * T::from_count(j) / T::from_count(per));
        }
    }
    out.push(t0);
    out
}

/// Minimum number of snapshots required inside the smallest window `[T_K, t0]`.
pub const MIN_WINDOW_SAMPLES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub k: usize,
    pub lambda_k: f64,
    #[serde(rename = "T_k")]
    pub t_k: f64,
    #[serde(rename = "U_k")]
    pub u_k: f64,
    pub sup_term: f64,
    pub dissipation_term: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEnergyReport {
    pub branch: Branch,
    #[serde(rename = "M")]
    pub m: f64,
    pub t0: f64,
    pub rows: Vec<LevelRow>,
    /// `max theta(t0)` (or `max -theta(t0)` for the minus branch).
    pub linf_at_t0: f64,
}

impl LevelEnergyReport {
    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.u_k).collect()
    }

    /// `U_k / U_{k-1}` for `k >= 1`; `None` where `U_{k-1} = 0`.
    pub fn decay_ratios(&self) -> Vec<Option<f64>> {
        self.rows
            .windows(2)
            .map(|w| (w[0].u_k > 0.0).then(|| w[1].u_k / w[0].u_k))
            .collect()
    }
}

fn snapshot_in<T: Real>(s: &Snapshot<T>, lo: T, hi: T, slack: T) -> bool {
    s.t >= lo - slack && s.t <= hi + slack
}

fn trapezoid<T: Real>(ts: &[T], ys: &[T]) -> T {
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| T::lit(0.5) * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// `||v||_2^2` by quadrature and `||Lambda^{1/2} v||_2^2` of the re-transformed field.
fn truncated_norms<T: Real>(v: &PhysicalField<T>) -> (T, T) {
    let l2 = v.l2();
    let dis = v.to_spectral().with_zero_mean().half_derivative_sq();
    (l2 * l2, dis)
}

/// `U_k` for `k = 0..=K` from the snapshots of `rec`.
pub fn level_energies<T: Real>(rec: &TrajectoryRecord<T>, cfg: &LevelConfig<T>) -> Result<LevelEnergyReport> {
    cfg.validate()?;
    let slack = rec.dt * T::lit(1e-6);
    let smallest = cfg.window_start(cfg.levels);
    let inside: Vec<&Snapshot<T>> = rec
        .snapshots
        .iter()
        .filter(|s| snapshot_in(s, T::zero(), cfg.t0, slack))
        .collect();
    let in_smallest = inside.iter().filter(|s| s.t >= smallest - slack).count();
    if in_smallest < MIN_WINDOW_SAMPLES {
        return usage(format!(
            "only {in_smallest} snapshots in the window [{smallest}, {}]; need at least {MIN_WINDOW_SAMPLES}",
            cfg.t0
        ));
    }
    let last = inside.last().expect("window is nonempty");
    if (last.t - cfg.t0).abs() > slack {
        return usage(format!("no snapshot at t0 = {} (last is at {})", cfg.t0, last.t));
    }
    let first_needed = cfg.window_start(0);
    let phys: Vec<(T, PhysicalField<T>)> = inside
        .iter()
        .filter(|s| s.t >= first_needed - slack)
        .map(|s| (s.t, s.field.to_physical()))
        .collect();

    let mut rows = Vec::with_capacity(cfg.levels + 1);
    for k in 0..=cfg.levels {
        let lam = cfg.lambda(k);
        let tk = cfg.window_start(k);
        let mut ts = Vec::new();
        let mut dis = Vec::new();
        let mut sup = T::zero();
        for (t, field) in phys.iter().filter(|(t, _)| *t >= tk - slack) {
            let (e, d) = truncated_norms(&truncate(field, lam, cfg.branch));
            sup = sup.max(e);
            ts.push(*t);
            dis.push(d);
        }
        let dissipation = T::lit(2.0) * cfg.nu * trapezoid(&ts, &dis);
        rows.push(LevelRow {
            k,
            lambda_k: lam.as_f64(),
            t_k: tk.as_f64(),
            u_k: (sup + dissipation).as_f64(),
            sup_term: sup.as_f64(),
            dissipation_term: dissipation.as_f64(),
            samples: ts.len(),
        });
    }
    let at_t0 = &phys.last().expect("window is nonempty").1;
    Ok(LevelEnergyReport {
        branch: cfg.branch,
        m: cfg.m.as_f64(),
        t0: cfg.t0.as_f64(),
        rows,
        linf_at_t0: branch_extreme(at_t0, cfg.branch).as_f64(),
    })
}

/// `C_M (U0^{1/2}/(nu t0) + (||f||_p/nu)^{p/(2p-2)} U0^{(p-2)/(4p-4)})`.
pub fn predict_m<T: Real>(u0: T, nu: T, t0: T, f_p_norm: T, p: T, c_m: T) -> Result<T> {
    if !(p > T::lit(2.0)) {
        return usage(format!("p must exceed 2, got {p}"));
    }
    if u0 < T::zero() || f_p_norm < T::zero() || !(nu > T::zero()) || !(t0 > T::zero()) || !(c_m > T::zero()) {
        return usage("predict_m needs U0, ||f||_p >= 0 and nu, t0, C_M > 0");
    }
    let two = T::lit(2.0);
    let transient = u0.sqrt() / (nu * t0);
    let forced = (f_p_norm / nu).powf(p / (two * p - two)) * u0.powf((p - two) / (T::lit(4.0) * p - T::lit(4.0)));
    Ok(c_m * (transient + forced))
}

/// Right side of the iteration inequality without its constant.
pub fn iteration_rhs(k: usize, u_prev: f64, cfg: &LevelConfig<f64>) -> f64 {
    let pp = cfg.p_prime();
    let kf = k as f64;
    let a = 2f64.powf(2.0 * kf + 1.0) / (cfg.nu * cfg.t0 * cfg.m) * u_prev.powf(1.5);
    let b = cfg.f_p_norm * 2f64.powf(2.0 * kf / pp) / (cfg.nu * cfg.m.powf(2.0 / pp))
        * u_prev.powf(1.0 + (2.0 - pp) / (2.0 * pp));
    a + b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationFit {
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    /// `(k, U_k / rhs_k)` for every usable level.
    pub ratios: Vec<(usize, f64)>,
    /// Levels whose ratio exceeds ten times the median.
    pub flagged: Vec<usize>,
}

/// Smallest constant making the iteration inequality hold at every usable level.
///
/// A level `k >= 1` is usable when `U_{k-1} > 0`. An all-zero report is
/// vacuous and fits with `C = 0`.
pub fn check_iteration(report: &LevelEnergyReport, cfg: &LevelConfig<f64>) -> Result<IterationFit> {
    let u = report.energies();
    if u.iter().all(|&x| x == 0.0) {
        return Ok(IterationFit {
            c_fit: 0.0,
            ratios: Vec::new(),
            flagged: Vec::new(),
        });
    }
    let ratios: Vec<(usize, f64)> = (1..u.len())
        .filter(|&k| u[k - 1] > 0.0)
        .map(|k| (k, u[k] / iteration_rhs(k, u[k - 1], cfg)))
        .collect();
    if ratios.len() < 2 {
        return usage(format!("only {} usable levels (U_(k-1) > 0); need at least 2", ratios.len()));
    }
    let c_fit = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut sorted: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let flagged = ratios.iter().filter(|r| r.1 > 10.0 * median).map(|r| r.0).collect();
    Ok(IterationFit { c_fit, ratios, flagged })
}

/// Both sides of the truncated energy inequality on `[t1, t2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedCheck {
    pub kinetic_start: f64,
    pub kinetic_end: f64,
    /// `nu int ||Lambda^{1/2} v||^2 + eps int ||grad v||^2`.
    pub dissipation: f64,
    /// `int (f, v)`.
    pub injection: f64,
    /// Left side minus right side; the inequality says this is at most zero.
    pub residual: f64,
    pub samples: usize,
}

/// Evaluates `1/2||v(t2)||^2 + nu int ||Lambda^{1/2} v||^2 - 1/2||v(t1)||^2 - int (f, v)`
/// for `v` the truncation of `theta`, using every snapshot in `[t1, t2]`.
pub fn truncated_energy_check<T: Real>(
    rec: &TrajectoryRecord<T>,
    lambda: T,
    branch: Branch,
    t1: T,
    t2: T,
) -> Result<TruncatedCheck> {
    if !(t1 < t2) {
        return usage(format!("need t1 < t2, got {t1} and {t2}"));
    }
    let Some(forcing) = &rec.forcing else {
        return usage("record carries no forcing");
    };
    let slack = rec.dt * T::lit(0.5);
    let snaps: Vec<&Snapshot<T>> = rec.snapshots.iter().filter(|s| snapshot_in(s, t1, t2, slack)).collect();
    let (Some(first), Some(last)) = (snaps.first(), snaps.last()) else {
        return usage(format!("no snapshots in [{t1}, {t2}]"));
    };
    if (first.t - t1).abs() > slack || (last.t - t2).abs() > slack {
        return usage(format!("missing snapshot at t1 = {t1} or t2 = {t2}"));
    }
    if snaps.len() < 2 {
        return usage("need at least two snapshots for the time integrals");
    }
    let f_phys = forcing.field.to_physical();
    let w = rec.domain.wavenumber_unit();
    let mut ts = Vec::with_capacity(snaps.len());
    let mut dis = Vec::with_capacity(snaps.len());
    let mut inj = Vec::with_capacity(snaps.len());
    let mut energy = Vec::with_capacity(snaps.len());
    for s in &snaps {
        let v = truncate(&s.field.to_physical(), lambda, branch);
        let l2 = v.l2();
        let spec = v.to_spectral().with_zero_mean();
        let mut d = rec.nu * spec.half_derivative_sq();
        if rec.eps > T::zero() {
            d += rec.eps * w * w * grad_sq(&spec);
        }
        ts.push(s.t);
        dis.push(d);
        inj.push(f_phys.integral_product(&v)?);
        energy.push(T::lit(0.5) * l2 * l2);
    }
    let dissipation = trapezoid(&ts, &dis);
    let injection = trapezoid(&ts, &inj);
    let (k1, k2) = (energy[0], *energy.last().unwrap());
    Ok(TruncatedCheck {
        kinetic_start: k1.as_f64(),
        kinetic_end: k2.as_f64(),
        dissipation: dissipation.as_f64(),
        injection: injection.as_f64(),
        residual: (k2 + dissipation - k1 - injection).as_f64(),
        samples: ts.len(),
    })
}

/// `sum |k|^2 |c_k|^2 L^2` in integer units.
fn grad_sq<T: Real>(f: &SpectralField<T>) -> T {
    let l = f.domain().length();
    let g = f.grid();
    l * l * f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = g.radius(i);
            r * r * c.norm_sqr()
        })
        .sum::<T>()
}

/// Allowance `a dt^2 E + b E / N` for the truncated check.
pub fn truncated_tolerance(dt: f64, n: usize, energy_scale: f64) -> f64 {
    const A: f64 = 10.0;
    const B: f64 = 1.0;
    A * dt * dt * energy_scale + B * energy_scale / n as f64
}

/// `int Lambda theta . v dx` and `||Lambda^{1/2} v||^2` for `v` the truncation of `theta`.
///
/// The first is never smaller than the second in the continuum; on the grid
/// the gap can go slightly negative by an amount that shrinks with resolution.
pub fn dissipation_gap<T: Real>(theta: &SpectralField<T>, lambda: T, branch: Branch) -> Result<(T, T)> {
    let lam_theta = theta.fractional_power(T::one())?.to_physical();
    let v = truncate(&theta.to_physical(), lambda, branch);
    let lhs = lam_theta.integral_product(&v)?;
    let rhs = v.to_spectral().with_zero_mean().half_derivative_sq();
    Ok((lhs, rhs))
}

/// Checks `1_{theta_k > 0} <= (2^k / M) theta_{k-1}` pointwise, exactly in `N`.
///
/// `values` are samples of `theta`; the minus branch is handled by the caller negating them.
pub fn indicator_bound_holds<N: Num + PartialOrd + Clone>(values: &[N], m: &N, k: u32) -> bool {
    let two = N::one() + N::one();
    let mut pow = N::one();
    for _ in 0..k {
        pow = pow * two.clone();
    }
    let level = |j: u32| -> N {
        // lambda_j = M (1 - 2^-j) = M (2^j - 1) / 2^j
        let mut p = N::one();
        for _ in 0..j {
            p = p * two.clone();
        }
        m.clone() * (p.clone() - N::one()) / p
    };
    let lam_k = level(k);
    let lam_prev = level(k - 1);
    values.iter().all(|v| {
        if v.clone() > lam_k {
            let prev = v.clone() - lam_prev.clone();
            let prev = if prev > N::zero() { prev } else { N::zero() };
            pow.clone() * prev >= m.clone()
        } else {
            true
        }
    })
}

/// [`indicator_bound_holds`] on grid values converted exactly to rationals.
pub fn indicator_bound_exact(values: &[f64], m: f64, k: u32, branch: Branch) -> Result<bool> {
    if k == 0 {
        return usage("the indicator bound starts at k = 1");
    }
    let conv = |x: f64| BigRational::from_float(x).ok_or_else(|| crate::Error::Usage(format!("non-finite value {x}")));
    let sign = if branch == Branch::Plus { 1.0 } else { -1.0 };
    let vals = values.iter().map(|&v| conv(sign * v)).collect::<Result<Vec<_>>>()?;
    let m = conv(m)?;
    if m <= BigRational::zero() {
        return usage("M must be positive");
    }
    Ok(indicator_bound_holds(&vals, &m, k))
}

/// Fitted constants of the `L^inf` bound on a recorded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinftyConstants {
    /// `sup_t ||theta(t)||_inf / (||theta(0)||_2/(nu t) + L^{1-2/p} ||f||_p / nu)`.
    #[serde(rename = "C1")]
    pub c1: f64,
    /// `sup ||theta||_inf nu / (L^{1-2/p} ||f||_p)` over the second half of the run.
    #[serde(rename = "C2")]
    pub c2: Option<f64>,
}

/// Compares the sampled `||theta||_inf` with both branches of the `L^inf` bound.
///
/// `late` requests the forced-branch constant, which is undefined when `f = 0`.
pub fn linfty_vs_bound<T: Real>(rec: &TrajectoryRecord<T>, late: bool) -> Result<LinftyConstants> {
    let Some(forcing) = &rec.forcing else {
        return usage("record carries no forcing");
    };
    let Some(first) = rec.samples.first() else {
        return usage("record has no samples");
    };
    let theta0 = first.l2.as_f64();
    let nu = rec.nu.as_f64();
    let l = rec.domain.length().as_f64();
    let p = forcing.p.as_f64();
    let forced = l.powf(1.0 - 2.0 / p) * forcing.lp.as_f64() / nu;
    let mut c1 = 0.0f64;
    for s in rec.samples.iter().filter(|s| s.t > T::zero()) {
        let t = s.t.as_f64();
        let bound = theta0 / (nu * t) + forced;
        if bound > 0.0 {
            c1 = c1.max(s.linf.as_f64() / bound);
        }
    }
    let c2 = if late {
        if forced == 0.0 {
            return usage("the late-time branch of the L^inf bound is degenerate for f = 0");
        }
        let t_end = rec.samples.last().unwrap().t.as_f64();
        let sup = rec
            .samples
            .iter()
            .filter(|s| s.t.as_f64() >= 0.5 * t_end)
            .map(|s| s.linf.as_f64())
            .fold(0.0, f64::max);
        Some(sup / forced)
    } else {
        None
    };
    Ok(LinftyConstants { c1, c2 })
}

/// NDJSON summary row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiSummary {
    /// Absent when fewer than two levels are usable.
    #[serde(rename = "C_fit")]
    pub c_fit: Option<f64>,
    #[serde(rename = "M_pred")]
    pub m_pred: f64,
    pub linf_at_t0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: Option<f64>,
}
