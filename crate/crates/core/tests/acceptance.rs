//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::sync::Arc;
use std::time::Instant;

use sqg_core::attractor::{
    absorbing_radius, decay_estimate_check, eddy_turnover_time, ensemble_absorb, strong_distance,
    tracking_experiment, viscosity_limit_study,
};
use sqg_core::degiorgi::{
    check_iteration, level_energies, level_snapshot_times, linfty_vs_bound, predict_m,
    truncated_energy_check, truncated_tolerance, Branch, LevelConfig, LevelEnergyReport,
};
use sqg_core::forcing::{make_forcing, random_band_field, random_initial_state, ForcingSpec};
use sqg_core::littlewood_paley::{band_multiplier, fit_flux_constant, flux, flux_bound_rhs, flux_integral, DyadicProfile};
use sqg_core::record::max_energy_residual;
use sqg_core::solver::{eps_sequence, SampleExtras, SnapshotSchedule, Solver, SolverConfig};
use sqg_core::spectral::{Domain, Grid, SpectralField};
use sqg_core::{Result, TrajectoryRecord64};

type Check = Result<(bool, String)>;

fn grid(n: usize) -> Arc<Grid<f64>> {
    Grid::new(Domain::periodic_2pi(n).unwrap())
}

/// The forced reference configuration: `f = 0.3 cos(2 x1 + x2)`.
fn forced(n: usize, nu: f64, dt: f64, t_final: f64) -> SolverConfig<f64> {
    let mut cfg = SolverConfig::new(Domain::periodic_2pi(n).unwrap(), nu, dt, t_final);
    cfg.forcing = ForcingSpec::single_mode((2, 1), 0.3);
    cfg
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn spectral_identities() -> Check {
    let start = Instant::now();
    let g = grid(64);
    let qmax = g.domain().max_band();
    let theta = random_band_field(&g, 1.0, 40.0, 11)?;
    let profile = DyadicProfile::new(&g);

    let mut pou = 0.0f64;
    for idx in 1..g.len() {
        let r = g.radius(idx);
        let s: f64 = (-1..=qmax).map(|q| band_multiplier(q, r)).sum();
        pou = pou.max((s - 1.0).abs());
    }

    let mut support = 0.0f64;
    let mut ortho = 0.0f64;
    let mut isometry = 0.0f64;
    for q in -1..=qmax {
        let tq = profile.project(&theta, q)?;
        let (lo, hi) = if q == -1 { (0.0, 1.0) } else { (2f64.powi(q - 1), 2f64.powi(q + 1)) };
        for (idx, c) in tq.coeffs().iter().enumerate() {
            let r = g.radius(idx);
            if r < lo || r > hi {
                support = support.max(c.norm());
            }
        }
        for p in -1..=qmax {
            if (p - q).abs() >= 2 {
                ortho = ortho.max(profile.project(&tq, p)?.l2() / theta.l2());
            }
        }
        let (u1, u2) = tq.riesz_perp()?;
        let unorm = (u1.l2().powi(2) + u2.l2().powi(2)).sqrt();
        if tq.l2() > 0.0 {
            isometry = isometry.max(rel_err(unorm, tq.l2()));
        }
    }

    let (u1, u2) = theta.riesz_perp()?;
    let div = u1.gradient().0.add(&u2.gradient().1)?;
    let (a, b) = (u1.gradient().0.l2(), u2.gradient().1.l2());
    let div_rel = div.l2() / (a + b);

    let secs = start.elapsed().as_secs_f64();
    let worst = pou.max(support).max(ortho).max(isometry).max(div_rel);
    Ok((
        worst <= 1e-12 && secs < 10.0,
        format!(
            "N=64: partition {pou:.1e}, support {support:.1e}, orthogonality {ortho:.1e}, \
             band isometry {isometry:.1e}, div u {div_rel:.1e}; {secs:.2} s"
        ),
    ))
}

/// The resolved forced run at N = 128 and its dt/2 companion.
struct ForcedRuns {
    coarse: TrajectoryRecord64,
    fine: TrajectoryRecord64,
}

const LEVEL_WINDOW: (f64, f64) = (5.0, 6.0);

fn forced_runs() -> Result<ForcedRuns> {
    let g = grid(128);
    let theta0 = random_initial_state(&g, 1.0, 6.0, 5.0, 7)?;
    let run = |dt: f64, extras: bool| -> Result<TrajectoryRecord64> {
        let mut cfg = forced(128, 0.1, dt, 10.0);
        cfg.sample_interval = dt;
        cfg.extras = SampleExtras { bands: extras, flux: extras };
        cfg.snapshots = SnapshotSchedule::Window {
            start: LEVEL_WINDOW.0,
            end: LEVEL_WINDOW.1,
            interval: 0.01,
        };
        Ok(Solver::new(cfg)?.integrate(&theta0)?)
    };
    Ok(ForcedRuns {
        coarse: run(1e-3, true)?,
        fine: run(5e-4, false)?,
    })
}

fn energy_equality(runs: &ForcedRuns) -> Check {
    let peak = runs.coarse.max_energy();
    let r1 = max_energy_residual(&runs.coarse, 0.0, 10.0)?;
    let r2 = max_energy_residual(&runs.fine, 0.0, 10.0)?;
    let ratio = r1 / r2;
    Ok((
        r1 <= 1e-5 * peak && (3.5..=4.5).contains(&ratio),
        format!("N=128, T=10: residual {:.2e} of peak energy at dt=1e-3, halving ratio {ratio:.2}", r1 / peak),
    ))
}

fn flux_identity_random() -> Check {
    let g = grid(64);
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let hi = 4.0 + (seed % 17) as f64;
        let theta = random_band_field(&g, 1.0, hi, 1000 + seed)?;
        let q = (seed % 6) as i32 - 1;
        let r = flux(&theta, q)?;
        worst = worst.max(r.identity_defect / r.scale.max(f64::MIN_POSITIVE));
    }
    Ok((worst <= 1e-10, format!("100 random fields at N=64: worst relative defect {worst:.1e}")))
}

fn flux_vanishing(runs: &ForcedRuns) -> Check {
    let rec = &runs.coarse;
    let (t0, t1) = (2.0, 10.0);
    let nb = rec.samples[0].bands.len();
    let mut mean_bands = vec![0.0; nb];
    let count = rec.samples.iter().filter(|s| s.t >= t0).count() as f64;
    for s in rec.samples.iter().filter(|s| s.t >= t0) {
        for (m, b) in mean_bands.iter_mut().zip(&s.bands) {
            *m += b / count;
        }
    }
    let peak = mean_bands
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(slot, _)| slot as i32 - 1)
        .unwrap();
    let qmax = nb as i32 - 2;
    let pis: Vec<f64> = (-1..=qmax)
        .map(|q| flux_integral(rec, q, t0, t1).map(f64::abs))
        .collect::<Result<_>>()?;
    // values at round-off relative to the largest flux count as zero
    let floor = 1e-12 * pis.iter().cloned().fold(0.0, f64::max);
    let mut decay = true;
    let mut factors = Vec::new();
    for q in peak + 1..qmax {
        let (a, b) = (pis[(q + 1) as usize], pis[(q + 2) as usize]);
        if a <= floor {
            decay &= b <= floor;
            continue;
        }
        factors.push(a / b);
        decay &= b <= 0.5 * a;
    }
    let (c_fit, ratios) = fit_flux_constant(rec, t0, t1)?;
    let bound_ok = (-1..=qmax).all(|q| {
        let lhs = pis[(q + 1) as usize];
        let rhs = flux_bound_rhs(rec, q, t0, t1).unwrap();
        lhs <= c_fit * rhs * (1.0 + 1e-12)
    });
    let ratio_str: Vec<String> = ratios.iter().map(|(q, r)| format!("{q}:{r:.2e}")).collect();
    Ok((
        decay && bound_ok && c_fit.is_finite() && c_fit > 0.0,
        format!(
            "energy peak at q={peak}; |int Pi_Q| drop factors for Q > peak {:?}; C_fit {c_fit:.3e} (ratios {})",
            factors.iter().map(|f| format!("{f:.2}")).collect::<Vec<_>>(),
            ratio_str.join(" ")
        ),
    ))
}

fn level_set(runs: &ForcedRuns) -> Check {
    let (t1, t2) = LEVEL_WINDOW;
    let mut lines = Vec::new();
    let mut ok = true;
    let linf = runs.coarse.snapshots[0].field.linf();
    for branch in [Branch::Plus, Branch::Minus] {
        for frac in [0.25, 0.5, 0.75] {
            let lambda = frac * linf;
            let mut res = Vec::new();
            for (rec, dt) in [(&runs.coarse, 1e-3), (&runs.fine, 5e-4)] {
                let c = truncated_energy_check(rec, lambda, branch, t1, t2)?;
                let tol = truncated_tolerance(dt, 128, rec.max_energy());
                ok &= c.residual <= tol;
                res.push((c.residual, tol));
            }
            let (p1, p2) = (res[0].0.max(0.0), res[1].0.max(0.0));
            ok &= p2 <= 0.5 * p1 + 1e-12 * runs.coarse.max_energy();
            lines.push(format!("{branch:?} {frac}: {:.1e}/{:.1e}", res[0].0, res[1].0));
        }
    }
    Ok((ok, format!("residuals at dt, dt/2 (tol {:.1e}): {}", truncated_tolerance(1e-3, 128, runs.coarse.max_energy()), lines.join(", "))))
}

const DG_T0: f64 = 2.0;
const DG_LEVELS: usize = 6;

struct DgRun {
    report: LevelEnergyReport,
    cfg: LevelConfig<f64>,
    m_pred: f64,
    linf_t0: f64,
}

/// Forced run to `t0`, then level energies at `M = M_pred(C_M)`.
fn degiorgi_run(n: usize, seed: u64, c_m: f64) -> Result<DgRun> {
    let g = grid(n);
    let theta0 = random_initial_state(&g, 1.0, 6.0, 5.0, seed)?;
    let mut cfg = forced(n, 0.1, 2e-3, DG_T0);
    cfg.sample_interval = 0.02;
    cfg.snapshots = SnapshotSchedule::Times(level_snapshot_times(DG_T0, DG_LEVELS, 8));
    let rec = Solver::new(cfg)?.integrate(&theta0)?;
    let f = rec.forcing.clone().unwrap();
    let mut lc = LevelConfig {
        m: 1.0,
        levels: DG_LEVELS,
        t0: DG_T0,
        nu: 0.1,
        p: f.p,
        f_p_norm: f.lp,
        branch: Branch::Plus,
    };
    let u0 = level_energies(&rec, &lc)?.rows[0].u_k;
    let m_pred = predict_m(u0, lc.nu, DG_T0, f.lp, f.p, c_m)?;
    lc.m = m_pred;
    let report = level_energies(&rec, &lc)?;
    let linf_t0 = rec.snapshots.last().unwrap().field.linf();
    Ok(DgRun { linf_t0, report, cfg: lc, m_pred })
}

fn degiorgi_suite() -> Check {
    // calibration: C_M makes M_pred 1.5 times the observed sup at t0
    let probe = degiorgi_run(128, 100, 1.0)?;
    let c_m = 1.5 * probe.linf_t0 / probe.m_pred;
    let mut ok = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_linf = 0.0f64;
    let mut tested = 0;
    for seed in 1..=5 {
        let run = degiorgi_run(128, seed, c_m)?;
        let u = run.report.energies();
        for k in 3..u.len() {
            if u[k - 1] > 0.0 {
                worst_ratio = worst_ratio.max(u[k] / u[k - 1]);
                tested += 1;
            } else {
                ok &= u[k] == 0.0;
            }
        }
        worst_linf = worst_linf.max(run.linf_t0 / run.m_pred);
    }
    ok &= worst_ratio <= 0.5 && worst_linf <= 1.0;

    let fits: Vec<f64> = [128, 256]
        .iter()
        .map(|&n| {
            let run = degiorgi_run(n, 1, c_m)?;
            Ok(check_iteration(&run.report, &run.cfg)?.c_fit)
        })
        .collect::<Result<_>>()?;
    let drift = rel_err(fits[1], fits[0]);
    ok &= drift <= 0.5;
    Ok((
        ok,
        format!(
            "C_M {c_m:.3e}; 5 runs: max U_k/U_(k-1) (k>=3) {worst_ratio:.3} over {tested} nonzero U_(k-1), \
             the rest have U_k = 0; max ||theta(t0)||/M_pred {worst_linf:.3}; \
             C_fit {:.3e} (N=128) vs {:.3e} (N=256), drift {:.0}%",
            fits[0],
            fits[1],
            100.0 * drift
        ),
    ))
}

fn spread(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo
}

fn linfty_constants() -> Check {
    let g = grid(64);
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for seed in 0..10u64 {
        let theta0 = random_initial_state(&g, 1.0, 6.0, 5.0, 200 + seed)?;
        let mut cfg = forced(64, 0.1, 2e-3, 10.0);
        cfg.sample_interval = 0.02;
        let rec = Solver::new(cfg)?.integrate(&theta0)?;
        let c = linfty_vs_bound(&rec, true)?;
        c1.push(c.c1);
        c2.push(c.c2.unwrap());
    }
    let finite = c1.iter().chain(&c2).all(|x| x.is_finite() && *x > 0.0);
    let (s1, s2) = (spread(&c1), spread(&c2));
    Ok((
        finite && s1 <= 3.0 && s2 <= 3.0,
        format!("10 members at N=64: C1 spread {s1:.2} (max {:.3}), C2 spread {s2:.2} (max {:.3})", c1.iter().cloned().fold(0.0, f64::max), c2.iter().cloned().fold(0.0, f64::max)),
    ))
}

fn absorbing_ball() -> Check {
    let g = grid(32);
    let nu = 0.2;
    let mut cfg = SolverConfig::new(*g.domain(), nu, 2e-3, 1.0);
    cfg.forcing = ForcingSpec::single_mode((2, 1), 0.6);
    cfg.sample_interval = 0.05;
    let f = make_forcing(&cfg.forcing, &g)?;
    let radius = absorbing_radius(&f.field, nu)?;
    let tau = eddy_turnover_time(radius, g.domain().length());
    let settle = 20.0;
    cfg.t_final = settle + 10.0 * tau;
    let initial: Vec<SpectralField<f64>> = (0..10u64)
        .map(|i| random_initial_state(&g, 1.0, 8.0, 2.0 * radius, 300 + i))
        .collect::<Result<_>>()?;
    let report = ensemble_absorb(&initial, &cfg, 0.1)?;
    let late = report.members.iter().all(|m| m.entry_time.is_some_and(|t| t <= settle));

    let mut cs = Vec::new();
    for theta0 in &initial {
        let mut short = cfg.clone();
        short.t_final = settle;
        cs.push(decay_estimate_check(&Solver::new(short)?.integrate(theta0)?)?);
    }
    let latest = report.members.iter().filter_map(|m| m.entry_time).fold(0.0, f64::max);
    let sc = spread(&cs);
    Ok((
        report.all_absorbed() && late && sc <= 2.0,
        format!(
            "R {radius:.3}, tau {tau:.2}: 10/10 entered by t={latest:.2}, stayed for >= 10 tau: {}; decay C spread {sc:.2}",
            report.all_absorbed() && late
        ),
    ))
}

fn tracking() -> Check {
    let g = grid(32);
    let mut cfg = SolverConfig::new(*g.domain(), 0.2, 5e-3, 1.0);
    cfg.forcing = ForcingSpec::single_mode((2, 1), 0.6);
    cfg.sample_interval = 0.05;
    let pairs: Vec<_> = (0..3u64)
        .map(|i| {
            Ok((
                random_initial_state(&g, 1.0, 8.0, 3.0, 400 + 2 * i)?,
                random_initial_state(&g, 1.0, 8.0, 3.0, 401 + 2 * i)?,
            ))
        })
        .collect::<Result<_>>()?;
    let ladder = [0.0, 5.0, 10.0, 15.0, 20.0];
    let report = tracking_experiment(&pairs, &cfg, &ladder, 5.0)?;
    let sups: Vec<String> = report
        .pairs
        .iter()
        .map(|p| p.ladder.iter().map(|r| format!("{:.2e}", r.sup_ds)).collect::<Vec<_>>().join(">"))
        .collect();
    let d0 = strong_distance(&pairs[0].0, &pairs[0].1)?;
    Ok((
        report.is_nonincreasing(0.05, 1e-12 * d0),
        format!("3 pairs, t* in {ladder:?}: {}", sups.join("; ")),
    ))
}

fn viscosity_limit() -> Check {
    let g = grid(32);
    let mut cfg = SolverConfig::new(*g.domain(), 0.2, 2e-3, 2.0);
    cfg.forcing = ForcingSpec::single_mode((2, 1), 0.6);
    cfg.sample_interval = 0.02;
    let theta0 = random_initial_state(&g, 1.0, 8.0, 3.0, 500)?;
    let rows = viscosity_limit_study(&theta0, &cfg, &eps_sequence(0.1, 7))?;
    let dw: Vec<f64> = rows.iter().map(|r| r.sup_dw).collect();
    let ok = dw.windows(2).all(|w| w[1] < w[0]) && dw.iter().all(|&x| x > 0.0);
    Ok((
        ok,
        format!("eps0=0.1, n=0..6: sup d_w {}", dw.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" > ")),
    ))
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, outcome: Check, secs: f64| {
        let (pass, detail) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!("{} {name}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
    };
    let timed = |f: &dyn Fn() -> Check| {
        let t = Instant::now();
        let r = f();
        (r, t.elapsed().as_secs_f64())
    };

    let (r, s) = timed(&spectral_identities);
    report("spectral identities", r, s);

    let t = Instant::now();
    let runs = forced_runs();
    let setup = t.elapsed().as_secs_f64();
    match &runs {
        Ok(runs) => {
            let (r, s) = timed(&|| energy_equality(runs));
            report("energy equality", r, s + setup);
            let (r, s) = timed(&|| {
                let (a, b) = (flux_identity_random()?, flux_vanishing(runs)?);
                Ok((a.0 && b.0, format!("{}; {}", a.1, b.1)))
            });
            report("flux identity and vanishing", r, s);
            let (r, s) = timed(&|| level_set(runs));
            report("level-set inequality", r, s);
        }
        Err(e) => {
            for name in ["energy equality", "flux identity and vanishing", "level-set inequality"] {
                report(name, Err(sqg_core::Error::Usage(format!("forced run failed: {e}"))), setup);
            }
        }
    }

    let (r, s) = timed(&degiorgi_suite);
    report("De Giorgi suite", r, s);
    let (r, s) = timed(&linfty_constants);
    report("L-infinity bound constants", r, s);
    let (r, s) = timed(&absorbing_ball);
    report("absorbing ball", r, s);
    let (r, s) = timed(&tracking);
    report("tracking property", r, s);
    let (r, s) = timed(&viscosity_limit);
    report("viscosity limit", r, s);

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
