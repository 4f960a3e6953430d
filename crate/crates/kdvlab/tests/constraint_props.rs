use kdvlab::constraint::{
    constraints_of_betas, grad_c, next_energy, relaxed_minimize, solve_betas, solve_betas_from, wiggle_derivative_formula,
    wiggle_direction, RegionLabel, WeightedBeta,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simple(v: &[f64]) -> Vec<WeightedBeta<f64>> {
    v.iter().copied().map(WeightedBeta::simple).collect()
}

/// Decreasing β with relative gaps of at least 10%.
fn separated_betas(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_n).prop_flat_map(|n| {
        (0.2f64..1.0, prop::collection::vec(0.1f64..1.0, n - 1)).prop_map(|(smallest, gaps)| {
            let mut b = vec![smallest];
            for g in gaps {
                let next = b.last().unwrap() * (1.0 + g);
                b.push(next);
            }
            b.reverse();
            b
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn round_trip_recovers_betas(betas in separated_betas(5)) {
        let n = betas.len();
        let e = constraints_of_betas(&simple(&betas), n);
        let report = solve_betas(&e).unwrap();
        prop_assert_eq!(report.region, RegionLabel::InteriorMnn);
        for (got, want) in report.distinct_values().iter().zip(&betas) {
            prop_assert!(((got - want) / want).abs() < 1e-9, "{:?} vs {:?}", report.distinct_values(), betas);
        }
        let back = constraints_of_betas(&report.betas, n);
        for (a, b) in back.iter().zip(&e) {
            prop_assert!(((a - b) / b).abs() < 1e-9);
        }
    }

    #[test]
    fn interior_multipliers_are_negative(betas in separated_betas(4)) {
        let n = betas.len();
        let report = solve_betas(&constraints_of_betas(&simple(&betas), n)).unwrap();
        prop_assert!(!report.one_sided);
        prop_assert!(report.multipliers.iter().all(|&l| l < 0.0), "{:?}", report.multipliers);
    }

    #[test]
    fn c_decreases_under_positive_bumps(betas in separated_betas(3), which in 0usize..3, size in 1e-4f64..1e-2) {
        let n = betas.len();
        let e = constraints_of_betas(&simple(&betas), n);
        let j = which % n;
        let mut bumped = e.clone();
        bumped[j] += size * e[j].abs();
        let base = solve_betas(&e).unwrap().c_value;
        if let Ok(r) = solve_betas(&bumped) {
            prop_assert!(r.c_value < base);
        }
    }
}

#[test]
fn uniqueness_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for _ in 0..5 {
            let mut betas: Vec<f64> = vec![rng.gen_range(0.3..0.8)];
            for _ in 1..n {
                let next = betas.last().unwrap() * rng.gen_range(1.2..2.0);
                betas.push(next);
            }
            betas.reverse();
            let e = constraints_of_betas(&simple(&betas), n);
            let reference = solve_betas(&e).unwrap().distinct_values();
            let mut converged = 0;
            for _ in 0..20 {
                let mut init: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..2.0 * betas[0])).collect();
                init.sort_by(|a, b| b.partial_cmp(a).unwrap());
                init.dedup();
                if init.len() < n {
                    continue;
                }
                if let Ok(x) = solve_betas_from(&e, &init) {
                    converged += 1;
                    for (a, b) in x.iter().zip(&reference) {
                        assert!(((a - b) / b).abs() < 1e-8, "n={n}: {x:?} vs {reference:?}");
                    }
                }
            }
            assert!(converged >= 15, "only {converged} starts converged for {betas:?}");
        }
    }
}

#[test]
fn vieta_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut configs = vec![vec![2.0, 1.0]];
    for _ in 0..20 {
        let b = rng.gen_range(0.4..1.0);
        configs.push(vec![b * rng.gen_range(1.3..2.5), b]);
    }
    configs.push(vec![2.0, 1.3, 0.7]);
    for betas in configs {
        let n = betas.len();
        let e = constraints_of_betas(&simple(&betas), n);
        let report = solve_betas(&e).unwrap();
        for j in 0..n {
            let h = 1e-4 * e[j].abs();
            let mut up = e.clone();
            let mut dn = e.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (solve_betas(&up).unwrap().c_value - solve_betas(&dn).unwrap().c_value) / (2.0 * h);
            let lam = report.multipliers[j];
            assert!(lam < 0.0);
            assert!(((fd - lam) / lam).abs() < 1e-6, "β={betas:?} j={j}: fd {fd} vs λ {lam}");
        }
    }
}

#[test]
fn reduced_stratum_gradient_matches_one_sided_difference() {
    // single soliton as a point on the boundary of the two-constraint set
    let e = constraints_of_betas(&simple(&[1.0]), 2);
    let report = solve_betas(&e).unwrap();
    let g = grad_c(&report, 2);
    assert!(g.one_sided);
    assert_eq!(g.lambda[1], 0.0);
    // along the stratum C = s_3 β^7 with β^3 = 3 e1 / 8
    let h = 1e-6;
    let c = |e1: f64| next_energy(&simple(&[(3.0 * e1 / 8.0).cbrt()]), 2);
    let fd = (c(e[0] + h) - c(e[0] - h)) / (2.0 * h);
    assert!(((g.lambda[0] - fd) / fd).abs() < 1e-7, "{} vs {fd}", g.lambda[0]);
}

#[test]
fn wiggle_matches_formula_and_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=4 {
        for _ in 0..5 {
            let mut betas: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.3..2.5)).collect();
            betas.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if betas.windows(2).any(|w| w[0] - w[1] < 0.1) {
                continue;
            }
            let (tangent, d) = wiggle_direction(&betas, n).unwrap();
            let formula = wiggle_derivative_formula(&betas);
            assert!(((d - formula) / formula).abs() < 1e-10, "{d} vs {formula}");
            let eps = 1e-5;
            let moved: Vec<f64> = betas.iter().enumerate().map(|(j, &b)| b + eps * if j < n { tangent[j] } else { 1.0 }).collect();
            let sums = |b: &[f64], m: i32| b.iter().map(|v| v.powi(m)).sum::<f64>();
            for m in 1..=n as i32 {
                let change = sums(&moved, 2 * m + 1) - sums(&betas, 2 * m + 1);
                assert!(change.abs() < 1e3 * eps * eps, "m={m} change {change}");
            }
            let p = 2 * n as i32 + 3;
            let change = sums(&moved, p) - sums(&betas, p);
            assert!((change - d * eps).abs() < 1e4 * eps * eps * d.abs().max(1.0), "{change} vs {}", d * eps);
        }
    }
}

#[test]
fn wiggle_descent_keeps_constraints() {
    let n = 2;
    let mut betas = vec![2.0, 1.4, 0.8];
    let p = 2 * n as i32 + 3;
    let sums = |b: &[f64], m: i32| b.iter().map(|v| v.powi(m)).sum::<f64>();
    let start: Vec<f64> = (1..=n as i32).map(|m| sums(&betas, 2 * m + 1)).collect();
    let mut objective = sums(&betas, p);
    for _ in 0..50 {
        let (tangent, d) = wiggle_direction(&betas, n).unwrap();
        let step = -1e-3 * d.signum();
        let mut trial: Vec<f64> = betas.iter().enumerate().map(|(j, &b)| b + step * if j < n { tangent[j] } else { 1.0 }).collect();
        // pull the first n back onto the constraint set
        for _ in 0..5 {
            let (t2, _) = wiggle_direction(&trial, n).unwrap();
            let _ = t2;
            let resid: Vec<f64> = (1..=n as i32).map(|m| sums(&trial, 2 * m + 1) - start[m as usize - 1]).collect();
            let mut a = vec![0.0; n * n];
            for m in 0..n {
                for j in 0..n {
                    a[m * n + j] = (2 * m + 3) as f64 * trial[j].powi(2 * m as i32 + 2);
                }
            }
            let det = a[0] * a[3] - a[1] * a[2];
            let dx0 = (-resid[0] * a[3] + resid[1] * a[1]) / det;
            let dx1 = (-resid[1] * a[0] + resid[0] * a[2]) / det;
            trial[0] += dx0;
            trial[1] += dx1;
        }
        let next = sums(&trial, p);
        assert!(next < objective);
        for m in 1..=n as i32 {
            assert!((sums(&trial, 2 * m + 1) - start[m as usize - 1]).abs() < 1e-8);
        }
        objective = next;
        betas = trial;
    }
}

#[test]
fn downward_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 20 {
        let big = vec![rng.gen_range(1.5..2.5), rng.gen_range(0.6..1.2)];
        let small = vec![big[0] * rng.gen_range(0.5..0.95), big[1] * rng.gen_range(0.2..0.95)];
        let e = constraints_of_betas(&simple(&big), 2);
        let lower = constraints_of_betas(&simple(&small), 2);
        if lower[0] > e[0] || lower[1].abs() > e[1].abs() {
            continue;
        }
        // componentwise smaller in the normalized moments
        let r = solve_betas(&lower).unwrap();
        assert!(r.betas.len() <= 2);
        checked += 1;
    }
}

#[test]
fn gas_minimizer_repeats_values() {
    let r = relaxed_minimize(&[24.0, -100.0], 4).unwrap();
    assert!(r.betas.len() <= 2);
    assert_eq!(r.total_degree(), 4, "{:?}", r.betas);
    assert!(r.betas.iter().any(|b| b.mult > 1));
}
