use std::sync::Arc;

use proptest::prelude::*;
use sqg_core::forcing::{random_band_field, random_initial_state};
use sqg_core::littlewood_paley::*;
use sqg_core::record::{Sample, TrajectoryRecord};
use sqg_core::solver::SolverConfig;
use sqg_core::spectral::{Domain, Grid, SpectralField};

fn grid(n: usize) -> Arc<Grid<f64>> {
    Grid::new(Domain::periodic_2pi(n).unwrap())
}

fn rel(a: &SpectralField<f64>, b: &SpectralField<f64>) -> f64 {
    a.sub(b).unwrap().l2() / b.l2()
}

#[test]
fn cutoff_shape() {
    assert_eq!(chi(0.0), 1.0);
    assert_eq!(chi(0.5), 1.0);
    assert_eq!(chi(1.0), 0.0);
    assert_eq!(chi(3.0), 0.0);
    let xs: Vec<f64> = (0..=1000).map(|i| 0.4 + 0.7 * i as f64 / 1000.0).collect();
    for w in xs.windows(2) {
        assert!(chi(w[1]) <= chi(w[0]));
    }
    for &x in &xs {
        assert!(phi(x) >= 0.0);
    }
    // symmetric bridge: chi(3/4) = 1/2
    assert!((chi(0.75f64) - 0.5).abs() < 1e-15);
    assert_eq!(phi(1.0), 1.0);
}

#[test]
fn unit_mode_lives_in_band_zero() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    assert!(rel(&project(&theta, 0).unwrap(), &theta) < 1e-15);
    assert_eq!(project(&theta, -1).unwrap().l2(), 0.0);
    let spec = band_spectrum(&theta);
    let total: f64 = spec.iter().map(|x| x.1).sum();
    assert!((spec[1].1 - total).abs() < 1e-15 * total);
    assert_eq!(spec[1].0, 0);
}

#[test]
fn partition_of_unity_on_the_grid() {
    for n in [32, 64, 256] {
        let g = grid(n);
        let qmax = g.domain().max_band();
        let worst = (1..g.len())
            .map(|idx| {
                let r = g.radius(idx);
                let s: f64 = (-1..=qmax).map(|q| band_multiplier(q, r)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "N = {n}: {worst}");
    }
}

#[test]
fn band_supports() {
    let g = grid(64);
    for q in -1..=g.domain().max_band() {
        for idx in 1..g.len() {
            let r = g.radius(idx);
            let m = band_multiplier(q, r);
            let (lo, hi) = if q == -1 { (0.0, 1.0) } else { (2f64.powi(q - 1), 2f64.powi(q + 1)) };
            if r < lo || r > hi {
                assert_eq!(m, 0.0, "q {q} r {r}");
            }
        }
    }
}

#[test]
fn bands_reconstruct_and_separate() {
    let g = grid(64);
    let theta = random_band_field(&g, 1.0, 40.0, 3).unwrap();
    let bd = BandDecomposition::new(&theta).unwrap();
    assert!(rel(&bd.reconstruct().unwrap(), &theta) < 1e-12);
    let d = DyadicProfile::new(&g);
    for q in d.band_range() {
        for p in d.band_range() {
            if (p - q).abs() >= 2 {
                let pq = d.project(&d.project(&theta, p).unwrap(), q).unwrap();
                assert_eq!(pq.l2(), 0.0);
            }
        }
    }
    // bands above the grid are empty
    assert_eq!(d.project(&theta, d.max_band() + 3).unwrap().l2(), 0.0);
    assert!(d.project(&theta, -2).is_err());
}

#[test]
fn low_pass_examples() {
    let g = grid(32);
    let theta = random_band_field(&g, 1.0, 20.0, 6).unwrap();
    let d = DyadicProfile::new(&g);
    assert_eq!(d.low_pass(&theta, d.max_band()).unwrap().coeffs(), theta.coeffs());
    let unit = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    assert_eq!(low_pass(&unit, -1).unwrap().l2(), 0.0);
    for big_q in -1..=d.max_band() {
        let lo = d.low_pass(&theta, big_q).unwrap();
        let hi = theta.map_symbol(|i| 1.0 - low_pass_multiplier(big_q, g.radius(i)));
        assert!(rel(&lo.add(&hi).unwrap(), &theta) < 1e-15);
        let summed = (-1..=big_q).fold(SpectralField::zeros(&g), |acc, q| acc.add(&d.project(&theta, q).unwrap()).unwrap());
        assert!(rel(&summed, &lo) < 1e-12 || lo.l2() == 0.0);
    }
}

#[test]
fn band_energy_fraction() {
    // phi_q >= 0 with sum phi_q = 1, so sum phi_q^2 lies in [1/2, 1]
    for seed in 0..8 {
        let g = grid(64);
        let theta = random_band_field(&g, 1.0, 40.0, seed).unwrap();
        let total: f64 = band_spectrum(&theta).iter().map(|x| x.1).sum();
        let frac = total / theta.l2().powi(2);
        assert!((0.5..=1.0 + 1e-12).contains(&frac), "{frac}");
    }
}

#[test]
fn single_mode_has_no_flux() {
    let g = grid(32);
    let theta = SpectralField::cosine(&g, (1, 0), 1.0).unwrap();
    for q in -1..=g.domain().max_band() {
        let r = flux(&theta, q).unwrap();
        assert!(r.pi_q.abs() < 1e-14, "{r:?}");
    }
}

#[test]
fn total_flux_cancels() {
    let g = grid(64);
    let theta = random_initial_state(&g, 1.0, 12.0, 1.0, 2).unwrap();
    let d = DyadicProfile::new(&g);
    let (u1, u2) = theta.riesz_perp().unwrap();
    let (g1, g2) = theta.gradient();
    let unorm = (u1.l2().powi(2) + u2.l2().powi(2)).sqrt();
    let gnorm = (g1.l2().powi(2) + g2.l2().powi(2)).sqrt();
    let r = d.flux(&theta, d.max_band()).unwrap();
    assert!(r.pi_q.abs() < 1e-12 * theta.l2() * unorm * gnorm, "{r:?}");
}

#[test]
fn flux_identity_on_random_field() {
    let g = grid(64);
    let theta = random_band_field(&g, 1.0, 30.0, 17).unwrap();
    let r = flux(&theta, 3).unwrap();
    assert!(r.pi_q.abs() > 1e-6 * r.scale, "{r:?}");
    assert!(r.identity_holds(1e-10), "{r:?}");
    assert!(r.ll_term.abs() < 1e-12 * r.scale, "{r:?}");
}

#[test]
fn profile_matches_direct_flux() {
    let g = grid(48);
    let theta = random_band_field(&g, 1.0, 20.0, 5).unwrap();
    let d = DyadicProfile::new(&g);
    let prof = d.flux_profile(&theta).unwrap();
    for (slot, q) in d.band_range().enumerate() {
        let r = d.flux(&theta, q).unwrap();
        assert!((prof[slot] - r.pi_q).abs() < 1e-11 * r.scale.max(1e-300), "Q {q}");
    }
}

fn record_with_bands(bands: impl Fn(f64) -> Vec<f64>, ts: &[f64]) -> TrajectoryRecord<f64> {
    let cfg = SolverConfig::new(Domain::periodic_2pi(32).unwrap(), 0.1, 0.1, 10.0);
    let mut rec = TrajectoryRecord::empty(&cfg);
    for &t in ts {
        rec.samples.push(Sample {
            t,
            l2: 0.0,
            linf: 0.0,
            h_half: 0.0,
            injection: 0.0,
            grad_sq: 0.0,
            bands: bands(t),
            flux: vec![0.0; 7],
        });
    }
    rec
}

#[test]
fn flux_bound_examples() {
    let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    let zero = record_with_bands(|_| vec![0.0; 7], &ts);
    assert_eq!(flux_bound_rhs(&zero, 2, 0.0, 1.0).unwrap(), 0.0);

    // only q* = 3 (slot 4) carries energy 2.5
    let single = record_with_bands(|_| (0..7).map(|s| if s == 4 { 2.5 } else { 0.0 }).collect(), &ts);
    for big_q in -1..=5 {
        let expect = 2f64.powf(-((3 - big_q) as f64).abs() / 2.0) * 8.0 * 2.5 * 0.6;
        let got = flux_bound_rhs(&single, big_q, 0.2, 0.8).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect, "{got} vs {expect}");
    }
    assert!(flux_bound_rhs(&single, 1, 0.5, 0.5).is_err());
    let bare = record_with_bands(|_| Vec::new(), &ts);
    assert!(flux_bound_rhs(&bare, 1, 0.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn flux_identity_holds(seed in any::<u64>(), hi in 4.0f64..15.0, big_q in -1i32..5) {
        let g = grid(32);
        let theta = random_band_field(&g, 1.0, hi, seed).unwrap();
        let r = flux(&theta, big_q).unwrap();
        prop_assert!(r.identity_holds(1e-10), "{:?}", r);
        prop_assert!(r.ll_term.abs() < 1e-12 * r.scale.max(f64::MIN_POSITIVE), "{:?}", r);
    }
}
