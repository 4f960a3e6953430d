use std::f64::consts::PI;

use kdvlab::scatter::{
    add_bound_states, blaschke, bound_states, jost_wronskian, jost_wronskian_at, log_a_moments, scattering_sample, trace_check,
    transmission_reciprocal, transmission_reciprocal_at, FrequencyGrid, ScatterError,
};
use kdvlab::{eval_multisoliton, Config, Grid, Profile};
use num_complex::Complex;
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(40.0, 2048).unwrap()
}

fn soliton(betas: &[f64], shifts: &[f64]) -> Profile {
    eval_multisoliton(&Config::new(betas.to_vec(), shifts.to_vec()).unwrap(), &grid()).unwrap()
}

fn sech2(amp: f64, shift: f64) -> Profile {
    Profile::from_fn(&grid(), |x: f64| amp / (x - shift).cosh().powi(2)).unwrap()
}

/// Pöschl–Teller depth ν(ν+1) = 1.8.
fn pt_nu() -> f64 {
    (-1.0 + (1.0f64 + 4.0 * 1.8).sqrt()) / 2.0
}

#[test]
fn free_potential_has_trivial_data() {
    let u = Profile::zeros(&grid());
    let s = scattering_sample(&u, &FrequencyGrid::default()).unwrap();
    assert!(s.a_values.iter().all(|a| (a - 1.0).norm() < 1e-12));
    assert!(s.bound_betas.is_empty());
    let m = log_a_moments(&s, 3);
    assert!(m.values.iter().all(|v| v.abs() < 1e-20));
}

#[test]
fn one_soliton_matches_blaschke_at_unit_frequency() {
    let a = transmission_reciprocal_at(&soliton(&[1.0], &[0.0]), Complex::new(1.0, 0.0)).unwrap();
    assert!((a - Complex::new(0.0, -1.0)).norm() < 1e-6, "{a}");
}

#[test]
fn wronskian_is_position_independent() {
    let u = sech2(-1.8, 0.3);
    let k = Complex::new(0.7, 0.2);
    let reference = jost_wronskian(&u, k).unwrap();
    for node in [700, 1024, 1400] {
        let w = jost_wronskian_at(&u, k, node).unwrap();
        assert!((w - reference).norm() < 1e-8 * reference.norm(), "{w} vs {reference}");
    }
}

#[test]
fn rejects_bad_inputs() {
    let u = Profile::zeros(&grid());
    assert!(matches!(jost_wronskian(&u, Complex::new(0.0, 0.0)), Err(ScatterError::ZeroFrequency)));
    assert!(matches!(jost_wronskian(&u, Complex::new(1.0, -0.5)), Err(ScatterError::LowerHalfPlane)));
    let wide = Profile::from_fn(&grid(), |x: f64| -1.0 / (x / 10.0).cosh()).unwrap();
    assert!(matches!(jost_wronskian(&wide, Complex::new(1.0, 0.0)), Err(ScatterError::NotDecayed(_))));
}

#[test]
fn multisoliton_is_reflectionless() {
    let s = transmission_reciprocal(&soliton(&[2.0, 1.0], &[0.0, 0.0]), &FrequencyGrid::default()).unwrap();
    for a in &s.a_values {
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }
    let m = log_a_moments(&s, 3);
    assert!(m.values.iter().all(|v| v.abs() < 1e-6), "{:?}", m.values);
}

#[test]
fn transmission_is_translation_invariant() {
    let kg = FrequencyGrid::new(10.0, 64).unwrap();
    let a0 = transmission_reciprocal(&sech2(-2.0, 0.0), &kg).unwrap();
    let a1 = transmission_reciprocal(&sech2(-2.0, 3.7), &kg).unwrap();
    for (x, y) in a0.a_values.iter().zip(&a1.a_values) {
        assert!((x - y).norm() < 1e-8);
    }
}

#[test]
fn bound_state_examples() {
    assert!(bound_states(&Profile::zeros(&grid())).unwrap().is_empty());
    let b = bound_states(&soliton(&[1.0], &[0.0])).unwrap();
    assert_eq!(b.len(), 1);
    assert!((b[0] - 1.0).abs() < 1e-8, "{b:?}");
    let b = bound_states(&soliton(&[2.0, 1.0], &[0.0, 0.0])).unwrap();
    assert_eq!(b.len(), 2);
    assert!((b[0] - 2.0).abs() < 1e-8 && (b[1] - 1.0).abs() < 1e-8, "{b:?}");
    let b = bound_states(&sech2(-1.8, 0.0)).unwrap();
    assert!((b[0] - pt_nu()).abs() < 1e-8, "{b:?}");
}

#[test]
fn bound_states_are_zeros_of_a() {
    let base = soliton(&[1.5, 0.7], &[1.0, -1.0]);
    let bump = Profile::from_fn(&grid(), |x: f64| 0.2 * (-(x - 0.5).powi(2)).exp()).unwrap();
    for u in [base.clone(), base.add(&bump).unwrap()] {
        for beta in bound_states(&u).unwrap() {
            // a(iκ) has a simple zero, so |a(iβ)| ≈ |a′|·|δβ|
            let a = transmission_reciprocal_at(&u, Complex::new(0.0, beta)).unwrap();
            let a_off = transmission_reciprocal_at(&u, Complex::new(0.0, beta * (1.0 + 1e-4))).unwrap();
            let slope = (a_off - a).norm() / (beta * 1e-4);
            assert!(a.norm() / slope < 1e-6, "β={beta}: |a|={}", a.norm());
        }
    }
}

#[test]
fn multisoliton_a_is_a_blaschke_product() {
    let betas = [2.0, 1.0];
    let u = soliton(&betas, &[0.5, -0.5]);
    let mut points = Vec::new();
    for i in 0..8 {
        for j in 0..8 {
            let re = -3.0 + 6.0 * (i as f64 + 0.5) / 8.0;
            points.push(Complex::new(re, 3.0 * j as f64 / 7.0));
        }
    }
    assert_eq!(points.len(), 64);
    for k in points {
        let a = transmission_reciprocal_at(&u, k).unwrap();
        let b = blaschke(&betas, k).unwrap();
        assert!((a - b).norm() < 1e-6, "k={k}: {a} vs {b}");
    }
}

#[test]
fn poeschl_teller_modulus_matches_closed_form() {
    let nu = pt_nu();
    let s = transmission_reciprocal(&sech2(-1.8, 0.0), &FrequencyGrid::default()).unwrap();
    for ((k, l), a) in s.k_grid.iter().zip(&s.log_abs_a).zip(&s.a_values) {
        let exact = 0.5 * ((PI * nu).sin().powi(2) / (PI * k).sinh().powi(2)).ln_1p();
        assert!((l - exact).abs() < 1e-6 * exact + 1e-10, "k={k}: {l} vs {exact}");
        assert!(a.norm() >= 1.0 - 1e-6);
    }
}

#[test]
fn trace_identities_for_solitons() {
    let kg = FrequencyGrid::default();
    for u in [soliton(&[1.0], &[0.0]), soliton(&[2.0, 1.0], &[0.0, 0.0]), soliton(&[1.5, 1.0, 0.5], &[2.0, 0.0, -2.0])] {
        let t = trace_check(&u, 3, &kg).unwrap();
        assert!(t.relative().iter().all(|&r| r < 1e-6), "{:?}", t.relative());
    }
}

#[test]
fn trace_identities_without_reflectionlessness() {
    let kg = FrequencyGrid::default();
    let potentials = [
        sech2(-1.8, 0.0),
        Profile::from_fn(&grid(), |x: f64| 0.5 * (-x * x).exp()).unwrap(),
        Profile::from_fn(&grid(), |x: f64| -2.0 / x.cosh().powi(2) + 0.3 * (-(x - 1.0).powi(2)).exp()).unwrap(),
    ];
    for u in potentials {
        let t = trace_check(&u, 3, &kg).unwrap();
        assert!(t.relative().iter().all(|&r| r < 1e-4), "{:?}", t.relative());
        assert!(t.moments.values.iter().all(|&m| m > 0.0));
    }
}

#[test]
fn trace_residuals_shrink_under_refinement() {
    let residual = |points: usize, k_max: f64| {
        let g = Grid::new(40.0, points).unwrap();
        let u = Profile::from_fn(&g, |x: f64| -1.8 / x.cosh().powi(2)).unwrap();
        trace_check(&u, 3, &FrequencyGrid::new(k_max, 512).unwrap()).unwrap().relative()
    };
    let coarse = residual(1024, 10.0);
    let fine = residual(2048, 20.0);
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(c / f >= 4.0, "{coarse:?} -> {fine:?}");
    }
}

#[test]
fn adding_bound_states() {
    let free = transmission_reciprocal(&Profile::zeros(&grid()), &FrequencyGrid::new(5.0, 64).unwrap()).unwrap();
    assert_eq!(add_bound_states(&free, &[]).unwrap(), free);
    let with = add_bound_states(&free, &[1.0]).unwrap();
    for (a, &k) in with.a_values.iter().zip(&with.k_grid) {
        assert!((a - blaschke(&[1.0], Complex::new(k, 0.0)).unwrap()).norm() < 1e-12);
    }
    assert_eq!(with.bound_betas, vec![1.0]);
    assert!(matches!(add_bound_states(&with, &[1.0]), Err(ScatterError::DuplicateBound(_))));

    let pt = transmission_reciprocal(&sech2(-1.8, 0.0), &FrequencyGrid::default()).unwrap();
    let before = log_a_moments(&pt, 3).values;
    let after = log_a_moments(&add_bound_states(&pt, &[0.4, 2.5]).unwrap(), 3).values;
    for (x, y) in before.iter().zip(&after) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
    }
}

#[test]
fn scattering_csv_round_trip() {
    let s = transmission_reciprocal(&sech2(-1.8, 0.0), &FrequencyGrid::new(5.0, 32).unwrap()).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let back = kdvlab::Sample::read_csv(&buf[..]).unwrap();
    assert_eq!(back.log_abs_a, s.log_abs_a);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn blaschke_has_unit_modulus_on_the_line(betas in prop::collection::vec(0.1f64..3.0, 0..5), k in -20.0f64..20.0) {
        let v = blaschke(&betas, Complex::new(k, 0.0)).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blaschke_is_bounded_in_the_upper_half_plane(betas in prop::collection::vec(0.1f64..3.0, 1..5), re in -5.0f64..5.0, im in 0.01f64..5.0) {
        prop_assert!(blaschke(&betas, Complex::new(re, im)).unwrap().norm() < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn modulus_of_a_is_at_least_one(amps in prop::collection::vec(-2.0f64..2.0, 1..4), centers in prop::collection::vec(-4.0f64..4.0, 3)) {
        let u = Profile::from_fn(&grid(), |x: f64| {
            amps.iter().zip(&centers).map(|(a, c)| a * (-(x - c).powi(2)).exp()).sum()
        }).unwrap();
        let s = transmission_reciprocal(&u, &FrequencyGrid::new(15.0, 128).unwrap()).unwrap();
        prop_assert!(s.min_abs_a() >= 1.0 - 1e-6);
        prop_assert!(s.log_abs_a.iter().all(|&l| l >= 0.0));
    }
}
