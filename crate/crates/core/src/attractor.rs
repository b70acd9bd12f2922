//! Metrics on `L^2` states and trajectory experiments around the global attractor.
//!
//! The weak metric is
//!
//! ```text
//! d_w(u, v) = sum_{nu in Z^2} 2^{-|nu|} |c_nu| / (1 + |c_nu|),    c = coefficients of u - v
//! ```
//!
//! over the grid modes, with `|nu|` Euclidean and the `1/L^2` coefficient normalization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::record::TrajectoryRecord;
use crate::scalar::Real;
use crate::solver::{SnapshotSchedule, Solver, SolverConfig};
use crate::spectral::{Grid, SpectralField};

/// `||a - b||_2`.
pub fn strong_distance<T: Real>(a: &SpectralField<T>, b: &SpectralField<T>) -> Result<T> {
    Ok(a.sub(b)?.l2())
}

pub fn weak_distance<T: Real>(a: &SpectralField<T>, b: &SpectralField<T>) -> Result<T> {
    let d = a.sub(b)?;
    let g = d.grid();
    let two = T::lit(2.0);
    Ok(d.coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let m = c.norm();
            two.powf(-g.radius(idx)) * m / (T::one() + m)
        })
        .sum())
}

/// `sum_nu 2^{-|nu|}` over the grid modes, the supremum of `d_w`.
pub fn weak_metric_bound<T: Real>(grid: &Grid<T>) -> T {
    (0..grid.len()).map(|idx| T::lit(2.0).powf(-grid.radius(idx))).sum()
}

/// `K` with `d_w <= K d_s`: each coefficient is at most `||.||_2 / L`.
pub fn weak_strong_constant<T: Real>(grid: &Grid<T>) -> T {
    weak_metric_bound(grid) / grid.domain().length()
}

/// `||f||_{H^{-1/2}} / nu * sqrt(L / 2 pi)`, the threshold radius of the absorbing ball.
pub fn absorbing_radius<T: Real>(f: &SpectralField<T>, nu: T) -> Result<T> {
    if !(nu > T::zero()) {
        return usage("nu must be positive");
    }
    let l = f.domain().length();
    Ok(f.sobolev(T::lit(-0.5))? / nu * (l / (T::lit(2.0) * T::PI())).sqrt())
}

/// `L^2 / R`: the time a velocity of size `R / L` takes to cross the box.
pub fn eddy_turnover_time<T: Real>(radius: T, length: T) -> T {
    length * length / radius
}

/// Smallest `C` with `||theta(t)||^2 <= C (||theta(0)||^2 e^{-nu (2 pi/L) t} + (L^2/nu^2) ||f||^2)`.
pub fn decay_estimate_check<T: Real>(rec: &TrajectoryRecord<T>) -> Result<T> {
    let Some(first) = rec.samples.first() else {
        return usage("record has no samples");
    };
    let f2 = rec.forcing.as_ref().map_or(T::zero(), |f| f.l2 * f.l2);
    let l = rec.domain.length();
    let w = rec.domain.wavenumber_unit();
    let e0 = first.l2 * first.l2;
    let floor = l * l / (rec.nu * rec.nu) * f2;
    let mut c = T::zero();
    for s in &rec.samples {
        let bound = e0 * (-(rec.nu * w * s.t)).exp() + floor;
        let e = s.l2 * s.l2;
        if bound > T::zero() {
            c = c.max(e / bound);
        } else if e > T::zero() {
            return Ok(T::infinity());
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberAbsorption {
    pub member: usize,
    /// First sample time inside the ball, if any.
    pub entry_time: Option<f64>,
    /// Largest `||theta||_2` from the entry on.
    pub post_entry_max: Option<f64>,
    pub final_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingBallReport {
    /// Threshold radius before the margin.
    pub radius: f64,
    pub margin: f64,
    pub members: Vec<MemberAbsorption>,
}

impl AbsorbingBallReport {
    pub fn ball(&self) -> f64 {
        self.radius * (1.0 + self.margin)
    }

    /// Every member entered and never left afterwards.
    pub fn all_absorbed(&self) -> bool {
        let ball = self.ball();
        self.members
            .iter()
            .all(|m| m.post_entry_max.is_some_and(|x| x <= ball))
    }

    /// Sampled time each member spent inside after entering.
    pub fn dwell_times(&self) -> Vec<Option<f64>> {
        self.members.iter().map(|m| m.entry_time.map(|e| m.final_time - e)).collect()
    }
}

fn absorption<T: Real>(member: usize, rec: &TrajectoryRecord<T>, ball: T) -> MemberAbsorption {
    let entry = rec.samples.iter().position(|s| s.l2 <= ball);
    MemberAbsorption {
        member,
        entry_time: entry.map(|i| rec.samples[i].t.as_f64()),
        post_entry_max: entry.map(|i| {
            rec.samples[i..]
                .iter()
                .map(|s| s.l2.as_f64())
                .fold(0.0, f64::max)
        }),
        final_time: rec.samples.last().map_or(0.0, |s| s.t.as_f64()),
    }
}

/// Integrates every initial state and records entry into `||theta|| <= R (1 + margin)`.
///
/// Members run in parallel on the current rayon pool.
pub fn ensemble_absorb<T: Real>(
    initial: &[SpectralField<T>],
    cfg: &SolverConfig<T>,
    margin: T,
) -> Result<AbsorbingBallReport> {
    if margin < T::zero() {
        return usage("margin must be nonnegative");
    }
    let mut cfg = cfg.clone();
    cfg.snapshots = SnapshotSchedule::None;
    let solver = Solver::new(cfg.clone())?;
    let radius = absorbing_radius(&solver.forcing().field, cfg.nu)?;
    let ball = radius * (T::one() + margin);
    let members = initial
        .par_iter()
        .enumerate()
        .map(|(i, theta0)| {
            let rec = solver.integrate(theta0).map_err(Error::from)?;
            Ok(absorption(i, &rec, ball))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AbsorbingBallReport {
        radius: radius.as_f64(),
        margin: margin.as_f64(),
        members,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub pair: usize,
    pub t_star: f64,
    pub sup_ds: f64,
    pub sup_dw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTrack {
    pub pair: usize,
    pub times: Vec<f64>,
    pub ds: Vec<f64>,
    pub dw: Vec<f64>,
    pub ladder: Vec<LadderRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub window: f64,
    pub pairs: Vec<PairTrack>,
}

impl TrackingReport {
    /// Ladder sup-distances never grow by more than `slack` (relative) plus an absolute `floor`.
    pub fn is_nonincreasing(&self, slack: f64, floor: f64) -> bool {
        self.pairs.iter().all(|p| {
            p.ladder
                .windows(2)
                .all(|w| w[1].sup_ds <= w[0].sup_ds * (1.0 + slack) + floor)
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = &LadderRow> {
        self.pairs.iter().flat_map(|p| p.ladder.iter())
    }
}

/// Advances both members of each pair in lockstep and records their distances
/// every `cfg.sample_interval`; then takes sups over `[t*, t* + window]`.
pub fn tracking_experiment<T: Real>(
    pairs: &[(SpectralField<T>, SpectralField<T>)],
    cfg: &SolverConfig<T>,
    ladder: &[T],
    window: T,
) -> Result<TrackingReport> {
    if ladder.is_empty() || ladder.windows(2).any(|w| !(w[0] < w[1])) {
        return usage("the t* ladder must be nonempty and strictly increasing");
    }
    if !(window > T::zero()) {
        return usage("tracking window must be positive");
    }
    let horizon = *ladder.last().unwrap() + window;
    let mut cfg = cfg.clone();
    cfg.t_final = horizon;
    cfg.snapshots = SnapshotSchedule::None;
    let solver = Solver::new(cfg.clone())?;
    let steps = cfg.steps();
    let every = (cfg.sample_interval / cfg.dt).round().to_usize().unwrap_or(1).max(1);
    let tracks = pairs
        .par_iter()
        .enumerate()
        .map(|(pair, (a0, b0))| {
            let mut a = a0.dealias().with_zero_mean();
            let mut b = b0.dealias().with_zero_mean();
            let (mut times, mut ds, mut dw) = (Vec::new(), Vec::new(), Vec::new());
            for n in 0..=steps {
                let t = T::from_count(n) * cfg.dt;
                if n % every == 0 || n == steps {
                    times.push(t.as_f64());
                    ds.push(strong_distance(&a, &b)?.as_f64());
                    dw.push(weak_distance(&a, &b)?.as_f64());
                }
                if n < steps {
                    a = solver.step(&a, t)?;
                    b = solver.step(&b, t)?;
                }
            }
            let slack = cfg.dt.as_f64() * 1e-6;
            let ladder = ladder
                .iter()
                .map(|&ts| {
                    let (lo, hi) = (ts.as_f64() - slack, (ts + window).as_f64() + slack);
                    let inside = times.iter().enumerate().filter(|(_, &t)| t >= lo && t <= hi);
                    let (mut sd, mut sw) = (0.0f64, 0.0f64);
                    for (i, _) in inside {
                        sd = sd.max(ds[i]);
                        sw = sw.max(dw[i]);
                    }
                    LadderRow {
                        pair,
                        t_star: ts.as_f64(),
                        sup_ds: sd,
                        sup_dw: sw,
                    }
                })
                .collect();
            Ok(PairTrack {
                pair,
                times,
                ds,
                dw,
                ladder,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrackingReport {
        window: window.as_f64(),
        pairs: tracks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscosityRow {
    pub eps: f64,
    pub sup_dw: f64,
    pub sup_ds: f64,
}

/// Runs the regularized equation for each `eps_n` and the `eps = 0` reference from the
/// same initial state; reports the sup over sample times of `d_w` (and `d_s`).
pub fn viscosity_limit_study<T: Real>(
    theta0: &SpectralField<T>,
    base: &SolverConfig<T>,
    eps: &[T],
) -> Result<Vec<ViscosityRow>> {
    if eps.iter().any(|&e| !(e >= T::zero())) {
        return usage("viscosity sequence must be nonnegative");
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return usage("viscosity sequence must be strictly decreasing");
    }
    let snapshots = |e: T| -> Result<Vec<SpectralField<T>>> {
        let mut cfg = base.clone();
        cfg.eps = e;
        cfg.snapshots = SnapshotSchedule::Every(base.sample_interval);
        let rec = Solver::new(cfg)?.integrate(theta0).map_err(Error::from)?;
        Ok(rec.snapshots.into_iter().map(|s| s.field).collect())
    };
    let reference = snapshots(T::zero())?;
    eps.par_iter()
        .map(|&e| {
            let run = if e == T::zero() { reference.clone() } else { snapshots(e)? };
            let (mut sw, mut sd) = (T::zero(), T::zero());
            for (a, b) in run.iter().zip(&reference) {
                sw = sw.max(weak_distance(a, b)?);
                sd = sd.max(strong_distance(a, b)?);
            }
            Ok(ViscosityRow {
                eps: e.as_f64(),
                sup_dw: sw.as_f64(),
                sup_ds: sd.as_f64(),
            })
        })
        .collect()
}

