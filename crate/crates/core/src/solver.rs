//! Time integration of the forced critical SQG equation and its viscous regularization.
//!
//! The equation advanced is
//!
//! ```text
//! d theta/dt + u . grad theta + nu Lambda theta + eps (-Delta) theta = f,    u = R^perp theta
//! ```
//!
//! The linear symbol `sigma(k) = nu |k| + eps |k|^2` (physical wavenumbers) is
//! integrated exactly through the factor `exp(-sigma dt)`; the advection and the
//! forcing are advanced with Heun's method under that factor.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use log::warn;

use crate::checkpoint::{self, Checkpoint};
use crate::error::{usage, Error, Result};
use crate::forcing::{make_forcing, Forcing, ForcingSpec};
use crate::littlewood_paley::DyadicProfile;
use crate::record::{Sample, Snapshot, TrajectoryRecord};
use crate::scalar::Real;
use crate::spectral::{Domain, Grid, PhysicalField, SpectralField};

/// Which full-field snapshots a run keeps in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum SnapshotSchedule<T> {
    #[default]
    None,
    /// Every `interval` time units over the whole run.
    Every(T),
    /// Every `interval` inside `[start, end]`.
    Window { start: T, end: T, interval: T },
    /// At the listed times, rounded to the nearest step.
    Times(Vec<T>),
}

/// Optional per-sample spectral diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleExtras {
    /// Dyadic band energies `||theta_q||_2^2`.
    pub bands: bool,
    /// Flux profile `Pi_Q` for every band index.
    pub flux: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointPlan<T> {
    pub dir: PathBuf,
    pub interval: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub domain: Domain<T>,
    pub nu: T,
    /// Coefficient of the `-eps Delta` damping added for viscous approximations.
    pub eps: T,
    pub dt: T,
    pub t_final: T,
    pub sample_interval: T,
    pub forcing: ForcingSpec<T>,
    pub seed: u64,
    pub extras: SampleExtras,
    pub snapshots: SnapshotSchedule<T>,
    pub checkpoints: Option<CheckpointPlan<T>>,
}

impl<T: Real> SolverConfig<T> {
    /// Unforced configuration with samples every step.
    pub fn new(domain: Domain<T>, nu: T, dt: T, t_final: T) -> Self {
        Self {
            domain,
            nu,
            eps: T::zero(),
            dt,
            t_final,
            sample_interval: dt,
            forcing: ForcingSpec::zero(),
            seed: 0,
            extras: SampleExtras::default(),
            snapshots: SnapshotSchedule::None,
            checkpoints: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.nu, self.eps, self.dt, self.t_final, self.sample_interval]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return usage("solver parameters must be finite");
        }
        if !(self.nu > T::zero()) {
            return usage(format!("solver.nu must be positive, got {}", self.nu));
        }
        if self.eps < T::zero() {
            return usage(format!("solver.eps must be nonnegative, got {}", self.eps));
        }
        if !(self.dt > T::zero() && self.dt < self.t_final) {
            return usage(format!("need 0 < solver.dt < solver.T, got dt = {}, T = {}", self.dt, self.t_final));
        }
        if self.sample_interval < self.dt {
            return usage(format!(
                "solver.sample_interval ({}) must be at least solver.dt ({})",
                self.sample_interval, self.dt
            ));
        }
        if let Some(plan) = &self.checkpoints {
            if !(plan.interval >= self.dt) {
                return usage("checkpoint interval must be at least solver.dt");
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().to_usize().unwrap_or(0)
    }

    fn steps_for(&self, interval: T) -> usize {
        (interval / self.dt).round().to_usize().unwrap_or(1).max(1)
    }

    fn snapshot_steps(&self) -> SnapshotSteps {
        let steps = self.steps();
        match &self.snapshots {
            SnapshotSchedule::None => SnapshotSteps::Set(BTreeSet::new()),
            SnapshotSchedule::Every(iv) => SnapshotSteps::Every(self.steps_for(*iv)),
            SnapshotSchedule::Window { start, end, interval } => {
                let every = self.steps_for(*interval);
                let lo = (*start / self.dt).round().to_usize().unwrap_or(0);
                let hi = ((*end / self.dt).round().to_usize().unwrap_or(steps)).min(steps);
                let mut set: BTreeSet<usize> = (lo..=hi).step_by(every).collect();
                set.insert(hi);
                SnapshotSteps::Set(set)
            }
            SnapshotSchedule::Times(ts) => SnapshotSteps::Set(
                ts.iter()
                    .filter_map(|t| (*t / self.dt).round().to_usize())
                    .filter(|&s| s <= steps)
                    .collect(),
            ),
        }
    }
}

enum SnapshotSteps {
    Every(usize),
    Set(BTreeSet<usize>),
}

impl SnapshotSteps {
    fn contains(&self, step: usize) -> bool {
        match self {
            Self::Every(k) => step % k == 0,
            Self::Set(s) => s.contains(&step),
        }
    }
}

/// A run that stopped early; carries everything recorded up to the failure.
#[derive(Debug)]
pub struct Interrupted<T: Real> {
    pub partial: TrajectoryRecord<T>,
    pub last_state: SpectralField<T>,
    pub error: Error,
}

impl<T: Real> From<Interrupted<T>> for Error {
    fn from(i: Interrupted<T>) -> Self {
        i.error
    }
}

/// `u . grad theta`, evaluated pseudo-spectrally and dealiased, with zero mean.
pub fn nonlinear_term<T: Real>(theta: &SpectralField<T>) -> Result<SpectralField<T>> {
    Ok(advection(theta)?.0)
}

/// Returns the advection term and `max |u|` on the grid.
fn advection<T: Real>(theta: &SpectralField<T>) -> Result<(SpectralField<T>, T)> {
    let (u1, u2) = theta.riesz_perp()?;
    let (g1, g2) = theta.gradient();
    let (pu1, pu2) = SpectralField::to_physical_pair(&u1, &u2)?;
    let (pg1, pg2) = SpectralField::to_physical_pair(&g1, &g2)?;
    let mut umax = T::zero();
    let values: Vec<T> = pu1
        .values()
        .iter()
        .zip(pu2.values())
        .zip(pg1.values().iter().zip(pg2.values()))
        .map(|((&a1, &a2), (&b1, &b2))| {
            umax = umax.max((a1 * a1 + a2 * a2).sqrt());
            a1 * b1 + a2 * b2
        })
        .collect();
    let product = PhysicalField::from_values(theta.grid(), values)?;
    Ok((product.to_spectral().dealias().with_zero_mean(), umax))
}

/// Precomputed integrating factors and forcing for one configuration.
pub struct Solver<T: Real> {
    cfg: SolverConfig<T>,
    grid: Arc<Grid<T>>,
    forcing: Forcing<T>,
    decay: Vec<T>,
    dyadic: Option<DyadicProfile<T>>,
}

impl<T: Real> Solver<T> {
    pub fn new(cfg: SolverConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let grid = Grid::new(cfg.domain);
        let forcing = make_forcing(&cfg.forcing, &grid)?;
        Self::with_forcing(cfg, grid, forcing)
    }

    /// Uses an already built forcing; it is dealiased before use.
    pub fn with_forcing(cfg: SolverConfig<T>, grid: Arc<Grid<T>>, forcing: Forcing<T>) -> Result<Self> {
        cfg.validate()?;
        if *grid.domain() != cfg.domain {
            return Err(Error::DomainMismatch(format!("{} vs {}", grid.domain(), cfg.domain)));
        }
        forcing.field.grid().check_same(&grid)?;
        let forcing = if forcing.field.is_dealiased() {
            forcing
        } else {
            Forcing::from_field(forcing.field.dealias(), forcing.p)?
        };
        let w = cfg.domain.wavenumber_unit();
        let decay = (0..grid.len())
            .map(|idx| {
                let k = w * grid.radius(idx);
                (-(cfg.nu * k + cfg.eps * k * k) * cfg.dt).exp()
            })
            .collect();
        let dyadic = (cfg.extras.bands || cfg.extras.flux).then(|| DyadicProfile::new(&grid));
        Ok(Self {
            cfg,
            grid,
            forcing,
            decay,
            dyadic,
        })
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn forcing(&self) -> &Forcing<T> {
        &self.forcing
    }

    /// `-u.grad theta + f`.
    fn explicit_rhs(&self, theta: &SpectralField<T>) -> Result<(SpectralField<T>, T)> {
        let (adv, umax) = advection(theta)?;
        Ok((self.forcing.field.sub(&adv)?, umax))
    }

    fn apply_decay(&self, f: &SpectralField<T>) -> SpectralField<T> {
        f.map_symbol(|idx| self.decay[idx])
    }

    /// One integrating-factor Heun step. Returns the new state and `max |u|` at the old one.
    fn advance(&self, theta: &SpectralField<T>, t: T, step: usize) -> Result<(SpectralField<T>, T)> {
        let dt = self.cfg.dt;
        let (a, umax) = self.explicit_rhs(theta)?;
        let predictor = self.apply_decay(&theta.lincomb(T::one(), &a, dt)?);
        let (b, _) = self.explicit_rhs(&predictor)?;
        let half = dt * T::lit(0.5);
        let next = self
            .apply_decay(&theta.lincomb(T::one(), &a, half)?)
            .lincomb(T::one(), &b, half)?
            .with_zero_mean();
        if !next.is_finite() {
            return Err(Error::BlowUp {
                time: (t + dt).as_f64(),
                step: step + 1,
                what: "non-finite Fourier coefficient".into(),
            });
        }
        Ok((next, umax))
    }

    /// Advances `theta` by one step from time `t`.
    pub fn step(&self, theta: &SpectralField<T>, t: T) -> Result<SpectralField<T>> {
        theta.grid().check_same(&self.grid)?;
        if !theta.is_zero_mean() {
            return usage("the state must have zero mean");
        }
        let (next, umax) = self.advance(theta, t, 0)?;
        self.check_cfl(umax);
        Ok(next)
    }

    /// `dt (2 pi/L) (N/3) max|u|`, which should stay below one.
    pub fn courant_number(&self, umax: T) -> T {
        self.cfg.dt * self.cfg.domain.wavenumber_unit() * T::from_count(self.grid.n()) / T::lit(3.0) * umax
    }

    fn check_cfl(&self, umax: T) -> bool {
        let c = self.courant_number(umax);
        if c >= T::one() {
            warn!("CFL number {c:.3} exceeds 1 (dt = {}, max|u| = {umax:.4})", self.cfg.dt);
            false
        } else {
            true
        }
    }

    pub fn sample(&self, theta: &SpectralField<T>, t: T) -> Result<Sample<T>> {
        let (g1, g2) = theta.gradient();
        let mut s = Sample {
            t,
            l2: theta.l2(),
            linf: theta.linf(),
            h_half: theta.half_derivative_sq().sqrt(),
            injection: self.forcing.field.inner(theta)?,
            grad_sq: g1.sobolev_sq(T::zero()) + g2.sobolev_sq(T::zero()),
            bands: Vec::new(),
            flux: Vec::new(),
        };
        if let Some(d) = &self.dyadic {
            if self.cfg.extras.bands {
                s.bands = d.band_spectrum(theta);
            }
            if self.cfg.extras.flux {
                s.flux = d.flux_profile(theta)?;
            }
        }
        Ok(s)
    }

    /// Runs to `T`, sampling every `sample_interval` and keeping the scheduled snapshots.
    pub fn integrate(&self, theta0: &SpectralField<T>) -> Result<TrajectoryRecord<T>, Interrupted<T>> {
        let mut record = TrajectoryRecord::new(&self.cfg, self.forcing.clone());
        let fail = |record: TrajectoryRecord<T>, state: &SpectralField<T>, error: Error| Interrupted {
            partial: record,
            last_state: state.clone(),
            error,
        };
        if let Err(e) = theta0.grid().check_same(&self.grid) {
            return Err(fail(record, theta0, e));
        }
        if !theta0.is_zero_mean() {
            return Err(fail(record, theta0, Error::Usage("initial state must have zero mean".into())));
        }
        let mut theta = theta0.dealias().with_zero_mean();
        let steps = self.cfg.steps();
        let sample_every = self.cfg.steps_for(self.cfg.sample_interval);
        let snapshots = self.cfg.snapshot_steps();
        let checkpoint_every = self.cfg.checkpoints.as_ref().map(|p| self.cfg.steps_for(p.interval));
        let mut cfl_ok = true;

        for n in 0..=steps {
            let t = T::from_count(n) * self.cfg.dt;
            if n % sample_every == 0 || n == steps {
                match self.sample(&theta, t) {
                    Ok(s) => record.samples.push(s),
                    Err(e) => return Err(fail(record, &theta, e)),
                }
            }
            if snapshots.contains(n) {
                record.snapshots.push(Snapshot { t, field: theta.clone() });
            }
            if let (Some(every), Some(plan)) = (checkpoint_every, &self.cfg.checkpoints) {
                if n % every == 0 || n == steps {
                    let path = plan.dir.join(format!("chk_{n:08}.bin"));
                    let chk = Checkpoint::from_field(&theta, self.cfg.nu, t);
                    if let Err(e) = checkpoint::write(&path, &chk) {
                        return Err(fail(record, &theta, e));
                    }
                    record.checkpoint_paths.push(path);
                }
            }
            if n == steps {
                break;
            }
            match self.advance(&theta, t, n) {
                Ok((next, umax)) => {
                    if cfl_ok {
                        cfl_ok = self.check_cfl(umax);
                    }
                    theta = next;
                }
                Err(e) => return Err(fail(record, &theta, e)),
            }
        }
        record.final_state = Some(theta);
        Ok(record)
    }
}

/// Advances `state` by one step of `cfg` from time `t`.
pub fn step<T: Real>(state: &SpectralField<T>, t: T, cfg: &SolverConfig<T>) -> Result<SpectralField<T>> {
    Solver::new(cfg.clone())?.step(state, t)
}

/// Integrates from `theta0` to `cfg.t_final`.
pub fn integrate<T: Real>(theta0: &SpectralField<T>, cfg: &SolverConfig<T>) -> Result<TrajectoryRecord<T>, Interrupted<T>> {
    match Solver::new(cfg.clone()) {
        Ok(s) => s.integrate(theta0),
        Err(error) => Err(Interrupted {
            partial: TrajectoryRecord::empty(cfg),
            last_state: theta0.clone(),
            error,
        }),
    }
}

/// Default viscosity sequence `eps_n = 2^-n eps_0`, `n = 0..count`.
pub fn eps_sequence<T: Real>(eps0: T, count: usize) -> Vec<T> {
    (0..count).map(|n| eps0 * T::lit(0.5).powi(n as i32)).collect()
}
