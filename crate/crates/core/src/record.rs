//! Sampled diagnostics of a run and the energy ledger built from them.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::forcing::Forcing;
use crate::scalar::Real;
use crate::solver::SolverConfig;
use crate::spectral::{Domain, SpectralField};

/// Scalar diagnostics at one sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub l2: T,
    pub linf: T,
    /// `||Lambda^{1/2} theta||_2`.
    pub h_half: T,
    /// `(f, theta)`.
    pub injection: T,
    /// `||grad theta||_2^2`, needed for the `eps` part of the ledger.
    pub grad_sq: T,
    /// `||Delta_q theta||_2^2` for `q = -1..=Q_max`, when requested.
    pub bands: Vec<T>,
    /// `Pi_Q` for `Q = -1..=Q_max`, when requested.
    pub flux: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct Snapshot<T: Real> {
    pub t: T,
    pub field: SpectralField<T>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord<T: Real> {
    pub domain: Domain<T>,
    pub nu: T,
    pub eps: T,
    pub dt: T,
    pub forcing: Option<Forcing<T>>,
    pub samples: Vec<Sample<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub checkpoint_paths: Vec<PathBuf>,
    /// State at the final time; `None` for an interrupted run.
    pub final_state: Option<SpectralField<T>>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn new(cfg: &SolverConfig<T>, forcing: Forcing<T>) -> Self {
        Self {
            forcing: Some(forcing),
            ..Self::empty(cfg)
        }
    }

    pub fn empty(cfg: &SolverConfig<T>) -> Self {
        Self {
            domain: cfg.domain,
            nu: cfg.nu,
            eps: cfg.eps,
            dt: cfg.dt,
            forcing: None,
            samples: Vec::new(),
            snapshots: Vec::new(),
            checkpoint_paths: Vec::new(),
            final_state: None,
        }
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn max_energy(&self) -> T {
        self.samples
            .iter()
            .map(|s| T::lit(0.5) * s.l2 * s.l2)
            .fold(T::zero(), T::max)
    }

    /// Cumulative ledger terms at every sample.
    pub fn ledger(&self) -> EnergyLedger<T> {
        let m = self.samples.len();
        let mut ledger = EnergyLedger {
            times: self.times(),
            kinetic: self.samples.iter().map(|s| T::lit(0.5) * s.l2 * s.l2).collect(),
            dissipation: Vec::with_capacity(m),
            regularization: Vec::with_capacity(m),
            injection: Vec::with_capacity(m),
        };
        let dis = |s: &Sample<T>| self.nu * s.h_half * s.h_half;
        let reg = |s: &Sample<T>| self.eps * s.grad_sq;
        let (mut d, mut r, mut i) = (T::zero(), T::zero(), T::zero());
        for (j, s) in self.samples.iter().enumerate() {
            if j > 0 {
                let p = &self.samples[j - 1];
                let h = T::lit(0.5) * (s.t - p.t);
                d += h * (dis(p) + dis(s));
                r += h * (reg(p) + reg(s));
                i += h * (p.injection + s.injection);
            }
            ledger.dissipation.push(d);
            ledger.regularization.push(r);
            ledger.injection.push(i);
        }
        ledger
    }

    /// Index of the sample at time `t`, allowing for rounding in the time grid.
    pub fn sample_index(&self, t: T) -> Result<usize> {
        let (first, last) = match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => return usage("record has no samples"),
        };
        let slack = self.dt * T::lit(1e-6);
        if t < first - slack || t > last + slack {
            return usage(format!("time {t} outside the sampled range [{first}, {last}]"));
        }
        let idx = self.samples.partition_point(|s| s.t < t);
        let best = [idx.saturating_sub(1), idx.min(self.samples.len() - 1)]
            .into_iter()
            .min_by(|&a, &b| {
                let da = (self.samples[a].t - t).abs();
                let db = (self.samples[b].t - t).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        Ok(best)
    }

    /// NDJSON rows: one per sample with the cumulative ledger.
    pub fn sample_records(&self) -> Vec<SampleRecord> {
        let ledger = self.ledger();
        self.samples
            .iter()
            .enumerate()
            .map(|(j, s)| SampleRecord {
                t: s.t.as_f64(),
                l2: s.l2.as_f64(),
                linf: s.linf.as_f64(),
                h_half: s.h_half.as_f64(),
                injection: s.injection.as_f64(),
                kinetic: ledger.kinetic[j].as_f64(),
                dissipation: ledger.dissipation[j].as_f64(),
                regularization: ledger.regularization[j].as_f64(),
                injection_integral: ledger.injection[j].as_f64(),
            })
            .collect()
    }
}

/// Cumulative energy budget, integrated by the trapezoid rule on the sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger<T> {
    pub times: Vec<T>,
    /// `||theta||^2 / 2`.
    pub kinetic: Vec<T>,
    /// `nu int ||Lambda^{1/2} theta||^2`.
    pub dissipation: Vec<T>,
    /// `eps int ||grad theta||^2`.
    pub regularization: Vec<T>,
    /// `int (f, theta)`.
    pub injection: Vec<T>,
}

impl<T: Real> EnergyLedger<T> {
    /// Signed imbalance between samples `i < j`.
    pub fn imbalance(&self, i: usize, j: usize) -> T {
        self.kinetic[j] - self.kinetic[i] + (self.dissipation[j] - self.dissipation[i])
            + (self.regularization[j] - self.regularization[i])
            - (self.injection[j] - self.injection[i])
    }
}

/// `|E(t2) + D(t1,t2) - E(t1) - I(t1,t2)|` with trapezoid time integrals.
///
/// `D` includes the `eps ||grad theta||^2` damping when the run is regularized.
pub fn energy_residual<T: Real>(rec: &TrajectoryRecord<T>, t1: T, t2: T) -> Result<T> {
    if !(t1 < t2) {
        return usage(format!("energy_residual needs t1 < t2, got {t1} and {t2}"));
    }
    let i = rec.sample_index(t1)?;
    let j = rec.sample_index(t2)?;
    if i >= j {
        return usage("energy_residual window contains a single sample");
    }
    Ok(rec.ledger().imbalance(i, j).abs())
}

/// Largest residual over every window `[t_i, t_j]` with both ends in `[t1, t2]`.
pub fn max_energy_residual<T: Real>(rec: &TrajectoryRecord<T>, t1: T, t2: T) -> Result<T> {
    let i0 = rec.sample_index(t1)?;
    let j0 = rec.sample_index(t2)?;
    let ledger = rec.ledger();
    // the imbalance is a difference of cumulative sums, so the widest spread of the running total wins
    let running: Vec<T> = (i0..=j0).map(|j| ledger.imbalance(i0, j)).collect();
    let hi = running.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = running.iter().copied().fold(T::infinity(), T::min);
    Ok(hi - lo)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub h_half: f64,
    pub injection: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    pub regularization: f64,
    pub injection_integral: f64,
}
