use kdvlab::evolve::{
    check_seam, conservation_drift, evolve_kdv, evolve_multisoliton, exact_in_frame, manifold_distance, orbital_stability_experiment,
    unit_bump, EvolveError,
};
use kdvlab::{eval_energy, eval_multisoliton, evolve_config, sobolev_norm, Config, Grid, Profile, Settings};
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(40.0, 1024).unwrap()
}

fn h1_error(cfg: &Config, grid: &Grid, settings: &Settings) -> f64 {
    let u = evolve_multisoliton(cfg, grid, settings).unwrap();
    let exact = eval_multisoliton(&exact_in_frame(cfg, settings.horizon, settings.frame_speed), grid).unwrap();
    sobolev_norm(&u.sub(&exact).unwrap(), 1)
}

#[test]
fn one_soliton_matches_exact_translation() {
    let cfg = Config::single(1.0, 0.0).unwrap();
    let err = h1_error(&cfg, &grid(), &Settings::new(1e-3, 1.0).unwrap());
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn two_soliton_collision_matches_exact_solution() {
    let cfg = Config::new(vec![2.0, 1.0], vec![-5.0, 5.0]).unwrap();
    let g = Grid::new(40.0, 2048).unwrap();
    let s = Settings::new(1.25e-4, 2.0).unwrap().with_frame_speed(8.0);
    let err = h1_error(&cfg, &g, &s);
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn fourth_order_in_time() {
    let cfg = Config::single(1.0, 0.0).unwrap();
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&dt| h1_error(&cfg, &grid(), &Settings::new(dt, 1.0).unwrap())).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "{errs:?}");
    }
}

#[test]
fn conserved_quantities_drift_little() {
    let g = grid();
    let s = Settings::new(1e-3, 1.0).unwrap().with_samples(16);
    let soliton = eval_multisoliton(&Config::single(1.0, 0.0).unwrap(), &g).unwrap();
    let drift = conservation_drift(&soliton, &s, 3).unwrap();
    assert!(drift.iter().all(|&d| d < 1e-7), "{drift:?}");
    let bump = Profile::from_fn(&g, |x: f64| 0.5 * (-x * x).exp()).unwrap();
    let drift = conservation_drift(&bump, &s, 3).unwrap();
    assert!(drift.iter().all(|&d| d < 1e-6), "{drift:?}");
}

#[test]
fn projected_scheme_keeps_e1_at_roundoff_for_any_step() {
    let u0 = eval_multisoliton(&Config::single(1.0, 0.0).unwrap(), &grid()).unwrap();
    for dt in [4e-2, 1e-2, 2.5e-3, 1e-3] {
        let s = Settings::new(dt, 1.0).unwrap().with_samples(8).with_l2_projection(true);
        let drift = conservation_drift(&u0, &s, 1).unwrap();
        assert!(drift[0] < 1e-10, "dt={dt}: {drift:?}");
    }
}

#[test]
fn unprojected_e1_drift_follows_scheme_order() {
    let u0 = eval_multisoliton(&Config::single(1.0, 0.0).unwrap(), &grid()).unwrap();
    let drift: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| conservation_drift(&u0, &Settings::new(dt, 1.0).unwrap().with_samples(8), 1).unwrap()[0])
        .collect();
    for w in drift.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "{drift:?}");
    }
}

#[test]
fn seam_violation_is_rejected() {
    let cfg = Config::single(2.0, 0.0).unwrap();
    let s = Settings::new(1e-3, 3.0).unwrap();
    assert!(matches!(evolve_multisoliton(&cfg, &grid(), &s), Err(EvolveError::SeamCollision { .. })));
    assert!(check_seam(&cfg, &grid(), &s.with_frame_speed(16.0)).is_ok());
}

#[test]
fn undecayed_data_is_rejected() {
    let u = Profile::from_fn(&grid(), |x: f64| 1.0 / x.cosh()).unwrap();
    let flat = Profile::from_fn(&grid(), |_| 1.0).unwrap();
    assert!(evolve_kdv(&u, &Settings::new(1e-3, 0.1).unwrap()).is_ok());
    assert!(matches!(evolve_kdv(&flat, &Settings::new(1e-3, 0.1).unwrap()), Err(EvolveError::NotDecayed(_))));
}

#[test]
fn distance_to_perturbed_soliton_is_small_but_positive() {
    let cfg = Config::single(1.0, 0.0).unwrap();
    let q = eval_multisoliton(&cfg, &grid()).unwrap();
    let u = q.add(&unit_bump(&cfg, &grid(), 1).unwrap().scale(1e-3)).unwrap();
    let (d, _) = manifold_distance(&u, &[1.0], 1).unwrap();
    assert!(d > 0.0 && d <= 1e-2, "{d}");
    // the unperturbed profile bounds the infimum
    assert!(d <= 1e-3 * (1.0 + 1e-9));
}

#[test]
fn distance_recovers_evolved_shifts_mid_collision() {
    let cfg = Config::new(vec![2.0, 1.0], vec![-5.0, 5.0]).unwrap();
    let g = Grid::new(40.0, 2048).unwrap();
    let moved = evolve_config(&cfg, 0.8);
    let u = eval_multisoliton(&moved, &g).unwrap();
    let (d, c) = manifold_distance(&u, &[2.0, 1.0], 1).unwrap();
    assert!(d < 1e-6, "{d}");
    for (got, want) in c.iter().zip(moved.shifts()) {
        assert!((got - want).abs() < 1e-6, "{c:?}");
    }
}

#[test]
fn unperturbed_soliton_stays_on_manifold() {
    let cfg = Config::single(1.0, 0.0).unwrap();
    let s = Settings::new(1e-3, 10.0).unwrap().with_frame_speed(4.0);
    let trace = orbital_stability_experiment(&cfg, 0.0, &s, 1, &grid()).unwrap();
    assert_eq!(trace.times.len(), 33);
    assert!(trace.sup_distance < 1e-6, "{}", trace.sup_distance);
}

#[test]
fn stability_scales_at_most_linearly() {
    let cfg = Config::single(1.0, 0.0).unwrap();
    let s = Settings::new(1e-3, 10.0).unwrap().with_frame_speed(4.0);
    let small = orbital_stability_experiment(&cfg, 1e-3, &s, 1, &grid()).unwrap();
    let large = orbital_stability_experiment(&cfg, 1e-2, &s, 1, &grid()).unwrap();
    let ratio = large.sup_distance / small.sup_distance;
    assert!(small.sup_distance > 0.0 && ratio <= 15.0, "{ratio}");
    assert_eq!(small.sup_distance, small.distances.iter().copied().fold(0.0, f64::max));
    let mut csv = Vec::new();
    small.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,distance\n"));
    assert_eq!(text.lines().count(), 34);
}

#[test]
fn two_soliton_stability_through_collision() {
    let cfg = Config::new(vec![2.0, 1.0], vec![-50.0, 50.0]).unwrap();
    let g = Grid::new(80.0, 4096).unwrap();
    let s = Settings::new(5e-4, 10.0).unwrap().with_frame_speed(10.0);
    let trace = orbital_stability_experiment(&cfg, 1e-2, &s, 2, &g).unwrap();
    assert!(trace.sup_distance < 0.5, "{}", trace.sup_distance);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn manifold_members_have_zero_distance(beta in 0.6f64..1.6, c in -8.0f64..8.0) {
        let u = eval_multisoliton(&Config::single(beta, c).unwrap(), &grid()).unwrap();
        let (d, best) = manifold_distance(&u, &[beta], 1).unwrap();
        prop_assert!(d < 1e-8, "{}", d);
        prop_assert!((best[0] - c).abs() < 1e-6);
    }

    #[test]
    fn evolution_commutes_with_grid_translation(amp in 0.1f64..1.0, shift in 1usize..40) {
        let g = grid();
        let h = g.spacing();
        let u = Profile::from_fn(&g, |x: f64| amp * (-x * x / 2.0).exp()).unwrap();
        let moved = Profile::from_fn(&g, |x: f64| { let y = x - shift as f64 * h; amp * (-y * y / 2.0).exp() }).unwrap();
        let s = Settings::new(1e-2, 0.2).unwrap();
        let a = evolve_kdv(&u, &s).unwrap();
        let b = evolve_kdv(&moved, &s).unwrap();
        let m = g.points();
        for j in 0..m {
            prop_assert!((a.values()[j] - b.values()[(j + shift) % m]).abs() < 1e-10);
        }
    }

    #[test]
    fn mass_is_conserved(amp in -1.0f64..1.0) {
        let g = grid();
        let u = Profile::from_fn(&g, |x: f64| amp * (-x * x).exp()).unwrap();
        let v = evolve_kdv(&u, &Settings::new(1e-2, 0.5).unwrap()).unwrap();
        let (m0, m1) = (kdvlab::integrate(&u), kdvlab::integrate(&v));
        prop_assert!((m0 - m1).abs() < 1e-12);
        let e1 = eval_energy(1, &u).unwrap();
        prop_assert!(e1 >= 0.0);
    }
}
