use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use sqg_core::forcing::{random_initial_state, ForcingSpec};
use sqg_core::record::{energy_residual, max_energy_residual};
use sqg_core::solver::{integrate, nonlinear_term, step, CheckpointPlan, SnapshotSchedule, Solver, SolverConfig};
use sqg_core::spectral::{Domain, Grid, SpectralField};
use sqg_core::Error;

fn grid(n: usize) -> Arc<Grid<f64>> {
    Grid::new(Domain::periodic_2pi(n).unwrap())
}

fn cfg(n: usize, nu: f64, dt: f64, t: f64) -> SolverConfig<f64> {
    SolverConfig::new(Domain::periodic_2pi(n).unwrap(), nu, dt, t)
}

/// `(u . grad theta)^_k = sum_{p+q=k} u^_p . (i q theta^_q)`, then the 2/3 cut.
fn convolution_oracle(theta: &SpectralField<f64>) -> Vec<Complex<f64>> {
    let g = theta.grid();
    let n = g.n() as i64;
    let c = theta.coeffs();
    let i = Complex::new(0.0, 1.0);
    let uhat = |idx: usize| -> (Complex<f64>, Complex<f64>) {
        let (k1, k2) = g.mode_pair(idx);
        if idx == 0 || g.on_nyquist_line(idx) {
            return (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        }
        let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
        (i * (-k2 as f64 / r) * c[idx], i * (k1 as f64 / r) * c[idx])
    };
    let mut out = vec![Complex::new(0.0, 0.0); g.len()];
    for k in 0..g.len() {
        let (k1, k2) = g.mode_pair(k);
        if 3 * k1.abs().max(k2.abs()) > n {
            continue;
        }
        let mut acc = Complex::new(0.0, 0.0);
        for p in 0..g.len() {
            let (p1, p2) = g.mode_pair(p);
            let Some(q) = g.index_of((k1 - p1, k2 - p2)) else { continue };
            if g.on_nyquist_line(q) {
                continue;
            }
            let (q1, q2) = g.mode_pair(q);
            let (u1, u2) = uhat(p);
            acc += u1 * i * q1 as f64 * c[q] + u2 * i * q2 as f64 * c[q];
        }
        out[k] = acc;
    }
    out[0] = Complex::new(0.0, 0.0);
    out
}

#[test]
fn nonlinear_term_of_single_mode_vanishes() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    assert!(nonlinear_term(&theta).unwrap().l2() < 1e-15);
    assert_eq!(nonlinear_term(&SpectralField::zeros(&g)).unwrap().l2(), 0.0);
}

#[test]
fn nonlinear_term_matches_dense_convolution() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0)
        .unwrap()
        .add(&SpectralField::cosine(&g, (0, 2), 1.0).unwrap())
        .unwrap();
    let fast = nonlinear_term(&theta).unwrap();
    let oracle = SpectralField::from_coeffs(&g, convolution_oracle(&theta)).unwrap();
    assert!(oracle.l2() > 0.1);
    assert!(fast.sub(&oracle).unwrap().l2() < 1e-12 * oracle.l2());
    assert_eq!(fast.coeffs()[0], Complex::new(0.0, 0.0));
}

#[test]
fn random_nonlinear_term_matches_oracle() {
    let g = grid(16);
    // modes inside the 2/3 box, so the pseudo-spectral product is alias-free there
    let theta = random_initial_state(&g, 1.0, 5.0, 1.0, 4).unwrap();
    let fast = nonlinear_term(&theta).unwrap();
    let oracle = SpectralField::from_coeffs(&g, convolution_oracle(&theta)).unwrap();
    assert!(fast.sub(&oracle).unwrap().l2() < 1e-12 * oracle.l2());
}

#[test]
fn invariant_mode_decays_exactly() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    let c = cfg(32, 1.0, 0.01, 1.0);
    let next = step(&theta, 0.0, &c).unwrap();
    let exact = theta.scale((-0.01f64).exp());
    assert!(next.sub(&exact).unwrap().l2() < 1e-14 * theta.l2());
}

#[test]
fn stationary_mode_is_nearly_fixed() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    for &(nu, dt) in &[(0.1, 1e-2), (1.0, 1e-3), (0.5, 5e-3)] {
        let mut c = cfg(32, nu, dt, 1.0);
        c.forcing = ForcingSpec::single_mode((1, 0), nu);
        let next = step(&theta, 0.0, &c).unwrap();
        let drift = next.sub(&theta).unwrap().l2();
        assert!(drift < 1e-3 * dt * dt * theta.l2(), "nu {nu} dt {dt}: {drift}");
    }
}

#[test]
fn forcing_weight_from_rest() {
    // the exact response of the linear part is dt * (1 - e^{-z}) / z * f, z = sigma dt
    let g = grid(32);
    let f = SpectralField::cosine(&g, (2, 1), 1.0).unwrap().add(&SpectralField::cosine(&g, (0, 3), 0.5).unwrap()).unwrap();
    let nu = 0.7;
    let err = |dt: f64| {
        let mut c = cfg(32, nu, dt, 1.0);
        c.forcing = ForcingSpec::random_band(1.0, 1.0, 0, 0.0);
        let solver = Solver::with_forcing(
            c,
            g.clone(),
            sqg_core::forcing::Forcing::from_field(f.clone(), 4.0).unwrap(),
        )
        .unwrap();
        let next = solver.step(&SpectralField::zeros(&g), 0.0).unwrap();
        let weighted = f.map_symbol(|idx| {
            let z = nu * g.radius(idx) * dt;
            if z == 0.0 {
                dt
            } else {
                dt * (1.0 - (-z).exp()) / z
            }
        });
        next.sub(&weighted).unwrap().l2()
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e1 < 1e-4, "{e1}");
    assert!(e1 / e2 > 3.9, "{e1} {e2}");
}

#[test]
fn free_decay_of_invariant_mode() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    let rec = integrate(&theta, &cfg(32, 1.0, 1e-2, 1.0)).unwrap();
    let last = rec.samples.last().unwrap();
    let expect = (-1.0f64).exp() * (2.0 * PI * PI).sqrt();
    assert!((last.t - 1.0).abs() < 1e-12);
    assert!((last.l2 - expect).abs() < 1e-6 * expect);
}

#[test]
fn unforced_energy_is_monotone() {
    let g = grid(32);
    let theta = random_initial_state(&g, 1.0, 8.0, 5.0, 7).unwrap();
    let rec = integrate(&theta, &cfg(32, 0.05, 2e-3, 0.5)).unwrap();
    for w in rec.samples.windows(2) {
        assert!(w[1].l2 <= w[0].l2, "{} -> {}", w[0].l2, w[1].l2);
    }
    for s in &rec.samples {
        assert!(s.t.is_finite() && s.l2.is_finite() && s.linf.is_finite());
    }
}

#[test]
fn zero_mean_is_exact() {
    let g = grid(32);
    let theta = random_initial_state(&g, 1.0, 8.0, 5.0, 8).unwrap();
    let mut c = cfg(32, 0.05, 5e-3, 0.2);
    c.forcing = ForcingSpec::random_band(2.0, 5.0, 3, 1.0);
    let rec = integrate(&theta, &c).unwrap();
    assert_eq!(rec.final_state.unwrap().coeffs()[0], Complex::new(0.0, 0.0));
}

#[test]
fn unforced_residual_of_invariant_mode() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    let rec = integrate(&theta, &cfg(32, 0.1, 1e-3, 1.0)).unwrap();
    let r = energy_residual(&rec, 0.0, 1.0).unwrap();
    assert!(r < 1e-8 * theta.l2().powi(2), "{r}");
}

#[test]
fn stationary_budget_balances() {
    let g = grid(32);
    let nu = 0.2;
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    let mut c = cfg(32, nu, 1e-3, 1.0);
    c.forcing = ForcingSpec::single_mode((1, 0), nu);
    let rec = integrate(&theta, &c).unwrap();
    let ledger = rec.ledger();
    let (d, i) = (*ledger.dissipation.last().unwrap(), *ledger.injection.last().unwrap());
    assert!((d - i).abs() < 1e-8 * i, "{d} vs {i}");
}

#[test]
fn forced_residual_is_small_and_second_order() {
    let g = grid(64);
    let theta = random_initial_state(&g, 1.0, 10.0, 3.0, 21).unwrap();
    let run = |dt: f64| {
        let mut c = cfg(64, 0.1, dt, 1.0);
        c.forcing = ForcingSpec::single_mode((2, 1), 1.0);
        integrate(&theta, &c).unwrap()
    };
    let (a, b) = (run(2e-3), run(1e-3));
    let ra = max_energy_residual(&a, 0.5, 1.0).unwrap();
    let rb = max_energy_residual(&b, 0.5, 1.0).unwrap();
    assert!(rb < 1e-5 * b.max_energy(), "{rb}");
    let ratio = ra / rb;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    assert!(energy_residual(&b, 0.5, 1.0).unwrap() <= rb);
}

#[test]
fn residual_window_is_checked() {
    let g = grid(16);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    let rec = integrate(&theta, &cfg(16, 0.1, 0.01, 0.1)).unwrap();
    assert!(matches!(energy_residual(&rec, 0.0, 0.5), Err(Error::Usage(_))));
    assert!(matches!(energy_residual(&rec, 0.05, 0.01), Err(Error::Usage(_))));
    assert!(energy_residual(&rec, 0.0, 0.1).is_ok());
}

#[test]
fn config_validation() {
    let ok = cfg(16, 0.1, 0.01, 1.0);
    assert!(ok.validate().is_ok());
    let mut c = ok.clone();
    c.nu = 0.0;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.eps = -1.0;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.dt = 2.0;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.sample_interval = 0.001;
    assert!(c.validate().is_err());
}

#[test]
fn blow_up_returns_partial_record() {
    let g = grid(16);
    let mut theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    theta.coeffs_mut()[g.index_of((2, 0)).unwrap()] = Complex::new(f64::NAN, 0.0);
    let theta = theta.with_zero_mean();
    let err = integrate(&theta, &cfg(16, 0.1, 0.01, 0.1)).unwrap_err();
    assert!(matches!(err.error, Error::BlowUp { step: 1, .. }));
    assert_eq!(err.partial.samples.len(), 1);
}

#[test]
fn runs_are_deterministic_and_schedules_honored() {
    let g = grid(32);
    let theta = random_initial_state(&g, 1.0, 8.0, 2.0, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(32, 0.1, 0.01, 0.5);
    c.forcing = ForcingSpec::random_band(1.0, 4.0, 9, 1.0);
    c.sample_interval = 0.1;
    c.snapshots = SnapshotSchedule::Window {
        start: 0.2,
        end: 0.4,
        interval: 0.1,
    };
    c.checkpoints = Some(CheckpointPlan {
        dir: dir.path().to_path_buf(),
        interval: 0.25,
    });
    let a = integrate(&theta, &c).unwrap();
    let b = integrate(&theta, &c).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.samples.len(), 6);
    let snap_t: Vec<f64> = a.snapshots.iter().map(|s| s.t).collect();
    assert_eq!(snap_t.len(), 3);
    assert!((snap_t[0] - 0.2).abs() < 1e-12 && (snap_t[2] - 0.4).abs() < 1e-12);
    assert_eq!(a.checkpoint_paths.len(), 3);
    let chk = sqg_core::checkpoint::read(&a.checkpoint_paths[2]).unwrap();
    assert_eq!(chk.time, 0.5);
    let back = chk.to_field(&g).unwrap();
    // the stored half spectrum is exact; the other half matches to round-off
    let last = a.final_state.as_ref().unwrap();
    assert!(back.sub(last).unwrap().l2() < 1e-14 * last.l2());
}

#[test]
fn single_precision_runs() {
    let g = Grid::new(Domain::<f32>::periodic_2pi(16).unwrap());
    let theta = SpectralField::cosine(&g, (1, 0), 1.0f32).unwrap();
    let c = SolverConfig::new(*g.domain(), 1.0f32, 0.01, 1.0);
    let rec = integrate(&theta, &c).unwrap();
    let expect = (-1.0f32).exp() * (2.0 * std::f32::consts::PI.powi(2)).sqrt();
    assert!((rec.samples.last().unwrap().l2 - expect).abs() < 1e-4 * expect);
}
