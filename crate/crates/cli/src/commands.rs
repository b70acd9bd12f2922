//! One function per subcommand. Each writes its NDJSON outputs and a manifest
//! into `<out root>/<command>/`.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sqg_core::attractor::{ensemble_absorb, eddy_turnover_time, tracking_experiment, viscosity_limit_study};
use sqg_core::checkpoint::{self, Checkpoint};
use sqg_core::degiorgi::{
    check_iteration, level_energies, level_snapshot_times, linfty_vs_bound, predict_m, Branch, DeGiorgiSummary,
    LevelConfig, LevelRow,
};
use sqg_core::forcing::random_initial_state;
use sqg_core::littlewood_paley::{flux_bound_rhs, BandEnergyRecord, DyadicProfile, FluxSeriesRecord};
use sqg_core::solver::{eps_sequence, SnapshotSchedule, Solver};
use sqg_core::spectral::{Domain, Grid};
use sqg_core::TrajectoryRecord64;

use crate::config::{parse_config, RunConfig};
use crate::manifest::RunManifest;
use crate::output::{io_err, write_ndjson};
use crate::{CliError, Command, RunArgs};

pub const OUT_DIR_ENV: &str = "SQG_OUT_DIR";

/// Output root: `--out-dir`, then `SQG_OUT_DIR`, then `output.dir`.
pub fn output_root(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_owned();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.dir.clone(),
    }
}

struct Run {
    cfg: RunConfig,
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(name: &str, args: &RunArgs) -> Result<Self, CliError> {
        let cfg = parse_config(&args.config)?;
        let dir = output_root(args.out_dir.as_deref(), &cfg).join(name);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let manifest = RunManifest::new(name, cfg.hash(), cfg.solver.seed);
        Ok(Self { cfg, dir, manifest })
    }

    fn ndjson<R: Serialize>(&mut self, file: &str, rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
        let path = write_ndjson(&self.dir.join(file), rows)?;
        self.manifest.outputs.push(path);
        Ok(())
    }

    fn finish(self) -> Result<RunManifest, CliError> {
        self.manifest.finish(&self.dir)
    }
}

fn with_pool<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn dispatch(command: Command) -> Result<Option<RunManifest>, CliError> {
    let (name, args): (&str, &RunArgs) = match &command {
        Command::Compare { a, b, rel } => {
            let n = crate::compare::compare_paths(a, b, *rel)?;
            println!("{n} file(s) match");
            return Ok(None);
        }
        Command::Simulate(a) => ("simulate", a),
        Command::DiagFlux { run, .. } => ("diag-flux", run),
        Command::DiagDegiorgi(a) => ("diag-degiorgi", a),
        Command::Absorb(a) => ("absorb", a),
        Command::Track(a) => ("track", a),
        Command::ViscLimit(a) => ("visc-limit", a),
    };
    let mut run = Run::start(name, args)?;
    with_pool(args.jobs, || match &command {
        Command::Simulate(_) => simulate(&mut run),
        Command::DiagFlux { checkpoint, .. } => diag_flux(&mut run, checkpoint.clone()),
        Command::DiagDegiorgi(_) => diag_degiorgi(&mut run),
        Command::Absorb(_) => absorb(&mut run),
        Command::Track(_) => track(&mut run),
        Command::ViscLimit(_) => visc_limit(&mut run),
        Command::Compare { .. } => unreachable!(),
    })??;
    run.finish().map(Some)
}

fn write_samples(run: &mut Run, rec: &TrajectoryRecord64) -> Result<(), CliError> {
    run.ndjson("samples.ndjson", rec.sample_records())
}

fn simulate(run: &mut Run) -> Result<(), CliError> {
    let grid = run.cfg.grid()?;
    let mut sc = run.cfg.solver_config()?;
    if run.cfg.output.checkpoint_interval.is_some() {
        let dir = run.dir.join("checkpoints");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        run.cfg.with_checkpoints(&mut sc, dir);
    }
    let theta0 = run.cfg.initial_state(&grid)?;
    let rec = match Solver::new(sc)?.integrate(&theta0) {
        Ok(rec) => rec,
        Err(interrupted) => {
            write_samples(run, &interrupted.partial)?;
            return Err(interrupted.into());
        }
    };
    write_samples(run, &rec)?;
    if run.cfg.output.bands || run.cfg.output.flux {
        let rows: Vec<BandEnergyRecord> = rec
            .samples
            .iter()
            .flat_map(|s| {
                s.bands.iter().enumerate().map(|(slot, &energy)| BandEnergyRecord {
                    t: s.t,
                    q: slot as i32 - 1,
                    energy,
                })
            })
            .collect();
        run.ndjson("bands.ndjson", rows)?;
    }
    if run.cfg.output.flux {
        let t_start = rec.samples[0].t;
        let mut rows = Vec::new();
        for (j, s) in rec.samples.iter().enumerate() {
            for (slot, &pi) in s.flux.iter().enumerate() {
                let q = slot as i32 - 1;
                let bound_rhs = if j == 0 { 0.0 } else { flux_bound_rhs(&rec, q, t_start, s.t)? };
                rows.push(FluxSeriesRecord {
                    t: s.t,
                    q,
                    pi_q: pi,
                    r_q_term: None,
                    hh_term: None,
                    bound_rhs,
                });
            }
        }
        run.ndjson("flux.ndjson", rows)?;
    }
    run.manifest.outputs.extend(rec.checkpoint_paths.iter().cloned());
    let final_state = rec.final_state.as_ref().expect("completed run has a final state");
    let t_end = rec.samples.last().map_or(0.0, |s| s.t);
    let path = run.dir.join("final.bin");
    checkpoint::write(&path, &Checkpoint::from_field(final_state, rec.nu, t_end))?;
    run.manifest.outputs.push(path);
    Ok(())
}

fn diag_flux(run: &mut Run, flag: Option<PathBuf>) -> Result<(), CliError> {
    let Some(path) = flag.or_else(|| run.cfg.experiment.flux.checkpoint.clone()) else {
        return Err(CliError::Config("diag-flux needs --checkpoint or experiment.flux.checkpoint".into()));
    };
    let chk = checkpoint::read(&path)?;
    let grid = Grid::new(Domain::new(chk.length, chk.n)?);
    let theta = chk.to_field(&grid)?;
    let profile = DyadicProfile::new(&grid);
    let rows = profile
        .band_range()
        .map(|q| {
            let mut r = profile.flux(&theta, q)?;
            r.t = Some(chk.time);
            Ok(r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    run.ndjson("flux_report.ndjson", rows)
}

#[derive(Serialize)]
struct BranchRow<'a, R> {
    branch: Branch,
    #[serde(flatten)]
    row: &'a R,
}

#[derive(Serialize)]
struct DeGiorgiLine {
    branch: Branch,
    #[serde(rename = "M")]
    m: f64,
    #[serde(flatten)]
    summary: DeGiorgiSummary,
    flagged: Vec<usize>,
    decay_ratios: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_note: Option<String>,
}

fn diag_degiorgi(run: &mut Run) -> Result<(), CliError> {
    let grid = run.cfg.grid()?;
    let dg = run.cfg.experiment.degiorgi.clone();
    let mut sc = run.cfg.solver_config()?;
    let t0 = dg.t0.unwrap_or(sc.t_final);
    sc.snapshots = SnapshotSchedule::Times(level_snapshot_times(t0, dg.levels, dg.per_window));
    let nu = sc.nu;
    let theta0 = run.cfg.initial_state(&grid)?;
    let rec = Solver::new(sc)?.integrate(&theta0)?;
    let forcing = rec.forcing.clone().expect("solver records its forcing");
    let linf = linfty_vs_bound(&rec, !forcing.is_zero())?;

    let mut levels = Vec::new();
    let mut summary = Vec::new();
    for branch in dg.branch.branches() {
        let mut lc = LevelConfig {
            m: 1.0,
            levels: dg.levels,
            t0,
            nu,
            p: forcing.p,
            f_p_norm: forcing.lp,
            branch,
        };
        // U_0 uses lambda_0 = 0, so it does not depend on M
        let u0 = level_energies(&rec, &lc)?.rows[0].u_k;
        let m_pred = predict_m(u0, nu, t0, forcing.lp, forcing.p, dg.c_m)?;
        lc.m = dg.m.unwrap_or(if m_pred > 0.0 { m_pred } else { 1.0 });
        let report = level_energies(&rec, &lc)?;
        let (c_fit, flagged, fit_note) = match check_iteration(&report, &lc) {
            Ok(fit) => (Some(fit.c_fit), fit.flagged, None),
            Err(sqg_core::Error::Usage(msg)) => (None, Vec::new(), Some(msg)),
            Err(e) => return Err(e.into()),
        };
        levels.extend(report.rows.iter().map(|r| {
            serde_json::to_value(BranchRow::<LevelRow> { branch, row: r }).expect("row serializes")
        }));
        summary.push(DeGiorgiLine {
            branch,
            m: lc.m,
            decay_ratios: report.decay_ratios(),
            summary: DeGiorgiSummary {
                c_fit,
                m_pred,
                linf_at_t0: report.linf_at_t0,
                c1: linf.c1,
                c2: linf.c2,
            },
            flagged,
            fit_note,
        });
    }
    write_samples(run, &rec)?;
    run.ndjson("degiorgi_levels.ndjson", levels)?;
    run.ndjson("degiorgi_summary.ndjson", summary)
}

#[derive(Serialize)]
struct AbsorbSummary {
    radius: f64,
    ball: f64,
    turnover_time: f64,
    all_absorbed: bool,
}

fn absorb(run: &mut Run) -> Result<(), CliError> {
    let grid = run.cfg.grid()?;
    let ex = run.cfg.experiment.absorb.clone();
    let sc = run.cfg.solver_config()?;
    let solver = Solver::new(sc.clone())?;
    let radius = sqg_core::attractor::absorbing_radius(&solver.forcing().field, sc.nu)?;
    let l2 = if radius > 0.0 { ex.initial_factor * radius } else { ex.initial_factor };
    let seed = run.cfg.solver.seed;
    let initial = (0..ex.members)
        .map(|i| random_initial_state(&grid, ex.k_lo, ex.k_hi, l2, seed ^ i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ensemble_absorb(&initial, &sc, ex.margin)?;
    let summary = AbsorbSummary {
        radius: report.radius,
        ball: report.ball(),
        turnover_time: eddy_turnover_time(report.radius, sc.domain.length()),
        all_absorbed: report.all_absorbed(),
    };
    run.ndjson("absorb.ndjson", &report.members)?;
    run.ndjson("absorb_summary.ndjson", [summary])
}

fn track(run: &mut Run) -> Result<(), CliError> {
    let grid = run.cfg.grid()?;
    let ex = run.cfg.experiment.track.clone();
    if ex.ladder.is_empty() {
        return Err(CliError::Config("experiment.track.ladder must list at least one t*".into()));
    }
    let sc = run.cfg.solver_config()?;
    let seed = run.cfg.solver.seed;
    let pairs = (0..ex.pairs as u64)
        .map(|i| {
            Ok((
                random_initial_state(&grid, ex.k_lo, ex.k_hi, ex.l2, seed ^ (2 * i))?,
                random_initial_state(&grid, ex.k_lo, ex.k_hi, ex.l2, seed ^ (2 * i + 1))?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = tracking_experiment(&pairs, &sc, &ex.ladder, ex.window)?;
    let rows: Vec<_> = report.rows().cloned().collect();
    run.ndjson("track.ndjson", rows)
}

fn visc_limit(run: &mut Run) -> Result<(), CliError> {
    let grid = run.cfg.grid()?;
    let ex = run.cfg.experiment.visc.clone();
    let sc = run.cfg.solver_config()?;
    let theta0 = run.cfg.initial_state(&grid)?;
    let rows = viscosity_limit_study(&theta0, &sc, &eps_sequence(ex.eps0, ex.count))?;
    run.ndjson("visc.ndjson", rows)
}
