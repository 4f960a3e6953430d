//! The acceptance checks, runnable from tests and from the command line.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constraint::{
    classify_closed_form, constraints_of_betas, point_mass_infimum, relaxed_minimize, solve_betas, solve_betas_from,
    wiggle_derivative_formula, wiggle_direction, RegionLabel, WeightedBeta,
};
use crate::energy::{energy_density, euler_lagrange_residual, eval_energies, reduce_canonical, DensityPolynomial, Rational};
use crate::evolve::{conservation_drift, evolve_multisoliton, exact_in_frame, orbital_stability_experiment, EvolutionSettings};
use crate::field::{sobolev_norm, GridFunction, SpatialGrid};
use crate::scatter::{blaschke, trace_check, transmission_reciprocal, transmission_reciprocal_at, FrequencyGrid};
use crate::sequences::{
    gas_sequence, molecular_residual, phase_diagram_sample, point_mass_diagnostics, wigner_von_neumann, wigner_von_neumann_grid,
};
use crate::soliton::{eval_multisoliton, SolitonConfig};

type Grid = SpatialGrid<f64>;
type Profile = GridFunction<f64>;
type Config = SolitonConfig<f64>;
type Outcome = Result<String, String>;

pub const CRITERIA: usize = 15;
pub const DEFAULT_SEED: u64 = 2024;

pub const SOLITON_SUP_TOL: f64 = 1e-10;
pub const ENERGY_REL_TOL: f64 = 1e-8;
pub const TRACE_SOLITON_TOL: f64 = 1e-6;
pub const TRACE_GENERAL_TOL: f64 = 1e-4;
pub const BLASCHKE_TOL: f64 = 1e-6;
pub const ROUND_TRIP_TOL: f64 = 1e-9;
pub const UNIQUENESS_TOL: f64 = 1e-8;
pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const WIGGLE_FORMULA_TOL: f64 = 1e-10;
pub const EULER_LAGRANGE_TOL: f64 = 1e-5;
pub const ONE_SOLITON_H1_TOL: f64 = 1e-6;
pub const COLLISION_H1_TOL: f64 = 1e-5;
pub const DRIFT_TOL: f64 = 1e-6;
pub const STABILITY_ZERO_TOL: f64 = 1e-6;
pub const STABILITY_RATIO_MAX: f64 = 15.0;
pub const GAS_GAP_TOL: f64 = 1e-3;
pub const WVN_E1_TOL: f64 = 0.02;
pub const WVN_E2_TOL: f64 = 0.02;
pub const WVN_E3_TOL: f64 = 0.03;
/// Errors below this are round-off: the quantity equals its limit up to e^{−4k²n²}.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
pub const MOLECULAR_TOL: f64 = 1e-2;

/// Result of one acceptance criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:>2} {}: {}", self.id, self.title, self.detail)
    }
}

pub fn title(id: usize) -> &'static str {
    match id {
        1 => "multisoliton exactness",
        2 => "energy formulas",
        3 => "canonical densities",
        4 => "trace formulas",
        5 => "Blaschke identity",
        6 => "constraint solver",
        7 => "gradient of C",
        8 => "wiggle derivative",
        9 => "Euler-Lagrange residual",
        10 => "KdV evolution",
        11 => "orbital stability",
        12 => "gas regime",
        13 => "point-mass regime",
        14 => "phase diagram",
        15 => "molecular decomposition",
        _ => "unknown",
    }
}

/// Runs one criterion with the default seed; ids outside 1..=15 fail.
pub fn run_criterion(id: usize) -> CriterionReport {
    run_criterion_seeded(id, DEFAULT_SEED)
}

/// Runs one criterion; the seed drives the randomized samples of criteria 2, 6, 7 and 8.
pub fn run_criterion_seeded(id: usize, seed: u64) -> CriterionReport {
    let outcome = match id {
        1 => multisoliton_exactness(),
        2 => energy_formulas(seed),
        3 => canonical_densities(),
        4 => trace_formulas(),
        5 => blaschke_identity(),
        6 => constraint_solver(seed),
        7 => gradient_of_c(seed),
        8 => wiggle_derivative(seed),
        9 => euler_lagrange(),
        10 => kdv_evolution(),
        11 => orbital_stability(),
        12 => gas_regime(),
        13 => point_mass_regime(),
        14 => phase_diagram(),
        15 => molecular_decomposition(),
        _ => Err(format!("no criterion {id}")),
    };
    let (passed, detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CriterionReport { id, title: title(id), passed, detail }
}

/// Runs the selected criteria in parallel and returns the reports in the given order.
pub fn run_criteria(ids: &[usize], seed: u64) -> Vec<CriterionReport> {
    ids.par_iter().map(|&id| run_criterion_seeded(id, seed)).collect()
}

pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    run_criteria(&(1..=CRITERIA).collect::<Vec<_>>(), seed)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn default_grid() -> Grid {
    SpatialGrid::new(40.0, 2048).expect("valid grid")
}

fn simple(v: &[f64]) -> Vec<WeightedBeta<f64>> {
    v.iter().copied().map(WeightedBeta::simple).collect()
}

/// (−1)^{n+1} 2^{2n+1}/(2n+1) Σ β^{2n+1}.
fn soliton_energy(n: usize, betas: &[f64]) -> f64 {
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    sign * 2f64.powi(2 * n as i32 + 1) / (2 * n + 1) as f64 * betas.iter().map(|b| b.powi(2 * n as i32 + 1)).sum::<f64>()
}

/// Decreasing β in [lo, hi) with gaps of at least `gap`.
fn random_betas(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        b.sort_by(|x, y| y.partial_cmp(x).unwrap());
        if b.windows(2).all(|w| w[0] - w[1] >= gap) {
            return b;
        }
    }
}

fn multisoliton_exactness() -> Outcome {
    let g = default_grid();
    let mut worst: f64 = 0.0;
    for beta in [0.5, 1.0, 2.0] {
        let c = 1.3;
        let q = eval_multisoliton(&Config::single(beta, c).map_err(fail)?, &g).map_err(fail)?;
        let x0 = c - (2.0 * beta).ln() / (2.0 * beta);
        for (x, v) in g.nodes().iter().zip(q.values()) {
            let exact = -2.0 * beta * beta / (beta * (x - x0)).cosh().powi(2);
            worst = worst.max((v - exact).abs());
        }
    }
    check(worst < SOLITON_SUP_TOL, format!("sup error {worst:.3e} (tol {SOLITON_SUP_TOL:e})"))
}

fn energy_formulas(seed: u64) -> Outcome {
    let g = default_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut worst_shift): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let n = rng.gen_range(1..=3);
        let betas = random_betas(&mut rng, n, 0.4, 1.6, 0.1);
        let shifts: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let other: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let a =
            eval_energies(4, &eval_multisoliton(&Config::new(betas.clone(), shifts).map_err(fail)?, &g).map_err(fail)?).map_err(fail)?;
        let b = eval_energies(4, &eval_multisoliton(&Config::new(betas.clone(), other).map_err(fail)?, &g).map_err(fail)?).map_err(fail)?;
        for m in 0..4 {
            worst = worst.max(rel(a[m], soliton_energy(m + 1, &betas)));
            worst_shift = worst_shift.max(rel(a[m], b[m]));
        }
    }
    check(
        worst < ENERGY_REL_TOL && worst_shift < ENERGY_REL_TOL,
        format!("formula {worst:.3e}, shift dependence {worst_shift:.3e} (tol {ENERGY_REL_TOL:e})"),
    )
}

fn canonical_densities() -> Outcome {
    let r = |n: i128, d: i128| Rational::new(n, d);
    let expected: [DensityPolynomial<Rational>; 3] = [
        DensityPolynomial::from_terms([(r(1, 2), vec![0, 0])]),
        DensityPolynomial::from_terms([(r(1, 2), vec![1, 1]), (r(1, 1), vec![0, 0, 0])]),
        DensityPolynomial::from_terms([(r(1, 2), vec![2, 2]), (r(5, 1), vec![0, 1, 1]), (r(5, 2), vec![0, 0, 0, 0])]),
    ];
    for (i, want) in expected.iter().enumerate() {
        let n = i + 1;
        let got = reduce_canonical(&energy_density::<Rational>(n).map_err(fail)?, n).map_err(fail)?;
        if &got != want {
            return Err(format!("E_{n}: got {got}, expected {want}"));
        }
    }
    Ok("E_1, E_2, E_3 densities match exactly".into())
}

fn trace_formulas() -> Outcome {
    let g = default_grid();
    let kg = FrequencyGrid::default();
    let solitons = [
        Config::single(1.0, 0.0).map_err(fail)?,
        Config::new(vec![2.0, 1.0], vec![0.0, 0.0]).map_err(fail)?,
        Config::new(vec![1.5, 1.0, 0.5], vec![2.0, 0.0, -2.0]).map_err(fail)?,
    ];
    let mut worst_soliton: f64 = 0.0;
    for cfg in &solitons {
        let r = trace_check(&eval_multisoliton(cfg, &g).map_err(fail)?, 3, &kg).map_err(fail)?.relative();
        worst_soliton = r.iter().copied().fold(worst_soliton, f64::max);
    }
    let potentials = [
        Profile::from_fn(&g, |x| -1.8 / x.cosh().powi(2)).map_err(fail)?,
        Profile::from_fn(&g, |x| 0.5 * (-x * x).exp()).map_err(fail)?,
        Profile::from_fn(&g, |x| -2.0 / x.cosh().powi(2) + 0.3 * (-(x - 1.0) * (x - 1.0)).exp()).map_err(fail)?,
    ];
    let mut worst_general: f64 = 0.0;
    for u in &potentials {
        let r = trace_check(u, 3, &kg).map_err(fail)?.relative();
        worst_general = r.iter().copied().fold(worst_general, f64::max);
    }
    check(
        worst_soliton < TRACE_SOLITON_TOL && worst_general < TRACE_GENERAL_TOL,
        format!("multisolitons {worst_soliton:.3e} (tol {TRACE_SOLITON_TOL:e}), general {worst_general:.3e} (tol {TRACE_GENERAL_TOL:e})"),
    )
}

fn blaschke_identity() -> Outcome {
    let g = default_grid();
    let betas = [2.0, 1.0];
    let u = eval_multisoliton(&Config::new(betas.to_vec(), vec![0.5, -0.5]).map_err(fail)?, &g).map_err(fail)?;
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let k = Complex::new(-3.0 + 6.0 * (i as f64 + 0.5) / 8.0, 3.0 * (j as f64 + 1.0) / 8.0);
            let a = transmission_reciprocal_at(&u, k).map_err(fail)?;
            worst = worst.max((a - blaschke(&betas, k).map_err(fail)?).norm());
        }
    }
    let s = transmission_reciprocal(&u, &FrequencyGrid::default()).map_err(fail)?;
    let modulus = s.a_values.iter().fold(0.0f64, |m, a| m.max((a.norm() - 1.0).abs()));
    check(
        worst < BLASCHKE_TOL && modulus < BLASCHKE_TOL,
        format!("64-point deviation {worst:.3e}, ||a|-1| on R {modulus:.3e} (tol {BLASCHKE_TOL:e})"),
    )
}

fn constraint_solver(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=5);
        let mut betas = vec![rng.gen_range(0.2..1.0)];
        for _ in 1..n {
            let next = betas.last().unwrap() * rng.gen_range(1.1..2.0);
            betas.push(next);
        }
        betas.reverse();
        let e = constraints_of_betas(&simple(&betas), n);
        let got = solve_betas(&e).map_err(fail)?.distinct_values();
        if got.len() != n {
            return Err(format!("{betas:?} came back as {got:?}"));
        }
        for (a, b) in got.iter().zip(&betas) {
            worst = worst.max(rel(*a, *b));
        }
    }
    let mut starts = 0;
    let mut agreeing = 0;
    for n in 1..=4 {
        for _ in 0..5 {
            let betas = random_betas(&mut rng, n, 0.3, 2.0, 0.15);
            let e = constraints_of_betas(&simple(&betas), n);
            let reference = solve_betas(&e).map_err(fail)?.distinct_values();
            for _ in 0..20 {
                let mut init: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..2.0 * betas[0])).collect();
                init.sort_by(|a, b| b.partial_cmp(a).unwrap());
                starts += 1;
                if let Ok(x) = solve_betas_from(&e, &init) {
                    if x.len() == n && x.iter().zip(&reference).all(|(a, b)| rel(*a, *b) < UNIQUENESS_TOL) {
                        agreeing += 1;
                    } else {
                        return Err(format!("start {init:?} reached a second solution {x:?} for {betas:?}"));
                    }
                }
            }
        }
    }
    check(
        worst < ROUND_TRIP_TOL && agreeing * 4 >= starts * 3,
        format!("round trip {worst:.3e} (tol {ROUND_TRIP_TOL:e}); {agreeing}/{starts} random starts converged, all to the same β"),
    )
}

fn gradient_of_c(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut negative = true;
    for sample in 0..20 {
        let n = 2 + sample % 2;
        let betas = random_betas(&mut rng, n, 0.4, 2.0, 0.2);
        let e = constraints_of_betas(&simple(&betas), n);
        let report = solve_betas(&e).map_err(fail)?;
        if report.region != RegionLabel::InteriorMnn {
            return Err(format!("{betas:?} not interior"));
        }
        negative &= report.multipliers.iter().all(|&l| l < 0.0);
        for j in 0..n {
            let central = |h: f64| -> Result<f64, String> {
                let (mut up, mut dn) = (e.clone(), e.clone());
                up[j] += h;
                dn[j] -= h;
                Ok((solve_betas(&up).map_err(fail)?.c_value - solve_betas(&dn).map_err(fail)?.c_value) / (2.0 * h))
            };
            // Richardson extrapolation of two central differences
            let h = 1e-3 * e[j].abs();
            let fd = (4.0 * central(h / 2.0)? - central(h)?) / 3.0;
            worst = worst.max(rel(fd, report.multipliers[j]));
        }
    }
    check(
        worst < GRADIENT_REL_TOL && negative,
        format!("Vieta vs finite differences {worst:.3e} (tol {GRADIENT_REL_TOL:e}); all multipliers negative: {negative}"),
    )
}

fn wiggle_derivative(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_formula: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    let sums = |b: &[f64], p: i32| b.iter().map(|v| v.powi(p)).sum::<f64>();
    for n in 1..=4 {
        for _ in 0..5 {
            let betas = random_betas(&mut rng, n + 1, 0.3, 2.5, 0.1);
            let (tangent, d) = wiggle_direction(&betas, n).map_err(fail)?;
            worst_formula = worst_formula.max(rel(d, wiggle_derivative_formula(&betas)));
            let p = 2 * n as i32 + 3;
            let moved =
                |eps: f64| -> Vec<f64> { betas.iter().enumerate().map(|(j, &b)| b + eps * if j < n { tangent[j] } else { 1.0 }).collect() };
            let err = |eps: f64| ((sums(&moved(eps), p) - sums(&moved(-eps), p)) / (2.0 * eps) - d).abs();
            let (coarse, fine) = (err(1e-2), err(5e-3));
            // halving ε should cut a second-order error by four
            if coarse > 1e-9 * d.abs() {
                worst_ratio = worst_ratio.min(coarse / fine);
            }
        }
    }
    check(
        worst_formula < WIGGLE_FORMULA_TOL && worst_ratio > 3.5,
        format!("formula {worst_formula:.3e} (tol {WIGGLE_FORMULA_TOL:e}); smallest error ratio on halving ε {worst_ratio:.2} (second order gives 4)"),
    )
}

fn euler_lagrange() -> Outcome {
    let g = default_grid();
    let mut details = Vec::new();
    let mut ok = true;
    for (betas, shifts) in [(vec![1.0], vec![0.0]), (vec![2.0, 1.0], vec![0.5, -0.5])] {
        let n = betas.len();
        let e = constraints_of_betas(&simple(&betas), n);
        let report = solve_betas(&e).map_err(fail)?;
        let q = eval_multisoliton(&Config::new(betas, shifts).map_err(fail)?, &g).map_err(fail)?;
        let el = euler_lagrange_residual(&q, n, &report.multipliers).map_err(fail)?;
        ok &= el.relative() < EULER_LAGRANGE_TOL;
        details.push(format!("N={n}: {:.3e}", el.relative()));
    }
    check(ok, format!("{} (tol {EULER_LAGRANGE_TOL:e})", details.join(", ")))
}

fn kdv_evolution() -> Outcome {
    let one = Config::single(1.0, 0.0).map_err(fail)?;
    let g = default_grid();
    let s = EvolutionSettings::new(1e-3, 1.0).map_err(fail)?;
    let h1 = |cfg: &Config, grid: &Grid, s: &EvolutionSettings<f64>| -> Result<f64, String> {
        let u = evolve_multisoliton(cfg, grid, s).map_err(fail)?;
        let exact = eval_multisoliton(&exact_in_frame(cfg, s.horizon, s.frame_speed), grid).map_err(fail)?;
        Ok(sobolev_norm(&u.sub(&exact).map_err(fail)?, 1))
    };
    let e1 = h1(&one, &g, &s)?;
    let two = Config::new(vec![2.0, 1.0], vec![-5.0, 5.0]).map_err(fail)?;
    let collision = EvolutionSettings::new(1.25e-4, 2.0).map_err(fail)?.with_frame_speed(8.0);
    let e2 = h1(&two, &g, &collision)?;
    let drift = conservation_drift(&eval_multisoliton(&one, &g).map_err(fail)?, &s.with_samples(16), 3).map_err(fail)?;
    let bump = Profile::from_fn(&g, |x| 0.5 * (-x * x).exp()).map_err(fail)?;
    let drift_bump = conservation_drift(&bump, &s.with_samples(16), 3).map_err(fail)?;
    let worst_drift = drift.iter().chain(&drift_bump).copied().fold(0.0, f64::max);
    check(
        e1 < ONE_SOLITON_H1_TOL && e2 < COLLISION_H1_TOL && worst_drift < DRIFT_TOL,
        format!("one-soliton H1 {e1:.3e}, collision H1 {e2:.3e}, drift E1..E3 {worst_drift:.3e}"),
    )
}

fn orbital_stability() -> Outcome {
    let cfg = Config::single(1.0, 0.0).map_err(fail)?;
    let g = SpatialGrid::new(40.0, 1024).map_err(fail)?;
    let s = EvolutionSettings::new(1e-3, 10.0).map_err(fail)?.with_frame_speed(4.0);
    let sup = |delta: f64| orbital_stability_experiment(&cfg, delta, &s, 1, &g).map(|t| t.sup_distance).map_err(fail);
    let (zero, small, large) = (sup(0.0)?, sup(1e-3)?, sup(1e-2)?);
    let ratio = large / small;
    check(
        zero < STABILITY_ZERO_TOL && ratio <= STABILITY_RATIO_MAX,
        format!("sup distance at δ=0 {zero:.3e}; ratio δ=1e-2 vs 1e-3 {ratio:.3}"),
    )
}

fn gas_regime() -> Outcome {
    let e = [24.0, -100.0];
    let relaxed = relaxed_minimize::<f64>(&e, 4).map_err(fail)?;
    let g = SpatialGrid::new(160.0, 8192).map_err(fail)?;
    // separations 10, 20, 40, 80
    let seq = gas_sequence(&e, 4, 10.0, 4, &g).map_err(fail)?;
    let last = eval_energies(3, &seq[3]).map_err(fail)?;
    let gap = (last[2] - relaxed.c_value).abs();
    let drift = rel(last[0], e[0]).max(rel(last[1], e[1]));
    check(
        relaxed.betas.len() <= 2 && gap < GAS_GAP_TOL && drift < GAS_GAP_TOL,
        format!("{} distinct β; E3 gap at separation 80 {gap:.3e}; constraint drift {drift:.3e}", relaxed.betas.len()),
    )
}

/// Smaller, or both at the round-off floor.
fn not_worse(before: f64, after: f64) -> bool {
    after < before || before.max(after) < ROUNDOFF_FLOOR
}

fn point_mass_regime() -> Outcome {
    let rt = PI.sqrt();
    let limits = [rt / 4.0, rt, 4.0 * rt];
    let seq = [16usize, 64, 256]
        .iter()
        .map(|&n| Ok((n, wigner_von_neumann(1.0, 1.0, n, &wigner_von_neumann_grid(1.0, n).map_err(fail)?).map_err(fail)?)))
        .collect::<Result<Vec<_>, String>>()?;
    let diag = point_mass_diagnostics(&seq, 4.0).map_err(fail)?;
    let err = |d: usize, m: usize| rel(diag[d].energies[m], limits[m]);
    let within = err(1, 0) < WVN_E1_TOL && err(1, 1) < WVN_E2_TOL && err(1, 2) < WVN_E3_TOL;
    let improving = (0..3).all(|m| not_worse(err(1, m), err(2, m)));
    let (inf, _, _) = point_mass_infimum(limits[0], limits[1]).map_err(fail)?;
    let inf_match = rel(diag[1].energies[2], inf) < WVN_E3_TOL;
    let betas: Vec<f64> = diag.iter().map(|d| d.max_beta()).collect();
    let shrinking = betas.windows(2).all(|w| w[1] < w[0]);
    check(
        within && improving && inf_match && shrinking,
        format!(
            "index 64 errors ({:.2e}, {:.2e}, {:.2e}), index 256 ({:.2e}, {:.2e}, {:.2e}); E3 vs infimum {:.2e}; max β {:?}",
            err(1, 0),
            err(1, 1),
            err(1, 2),
            err(2, 0),
            err(2, 1),
            err(2, 2),
            rel(diag[1].energies[2], inf),
            betas.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>()
        ),
    )
}

/// Label from the curves traced by N equal solitons, e₂ = −N·(32/5)β⁵ with N·(8/3)β³ = e₁.
fn equal_soliton_label(e1: f64, e2: f64) -> RegionLabel {
    if e2 >= 0.0 {
        return RegionLabel::PointMass;
    }
    let curve = |n: f64| -n * 32.0 / 5.0 * (3.0 * e1 / (8.0 * n)).cbrt().powi(5);
    if e2 < curve(1.0) {
        return RegionLabel::Infeasible;
    }
    if e2 < curve(2.0) {
        return RegionLabel::InteriorMnn;
    }
    let mut n = 2.0;
    while e2 >= curve(n) {
        n += 1.0;
    }
    RegionLabel::Gas(n as usize)
}

fn phase_diagram() -> Outcome {
    let res = 128;
    let d = phase_diagram_sample((0.0, 10.0), (-30.0, 5.0), res).map_err(fail)?;
    let mut mismatches = 0;
    for i in 0..res {
        for j in 0..res {
            let want = equal_soliton_label(d.e1[i], d.e2[j]);
            if d.labels[i][j] == want {
                continue;
            }
            mismatches += 1;
            let adjacent = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|&(di, dj)| {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                (0..res as i64).contains(&a) && (0..res as i64).contains(&b) && d.labels[a as usize][b as usize] == want
            });
            if !adjacent {
                return Err(format!("({}, {}) labelled {} but the curves give {want}", d.e1[i], d.e2[j], d.labels[i][j]));
            }
        }
    }
    let counts = d.counts();
    let all_present = ["Infeasible", "InteriorMnn", "Gas", "PointMass"].iter().all(|t| counts.contains_key(t));
    let sanity = classify_closed_form(24.0, -100.0) == RegionLabel::Gas(4);
    check(all_present && sanity, format!("{mismatches} cells off the equal-soliton curves, all adjacent to a boundary; counts {counts:?}"))
}

fn molecular_decomposition() -> Outcome {
    let g = SpatialGrid::new(120.0, 4096).map_err(fail)?;
    let groups = [Config::single(2.0, 0.0).map_err(fail)?, Config::single(1.0, 0.0).map_err(fail)?];
    let r =
        [20.0, 40.0, 80.0].iter().map(|&s| molecular_residual(&groups, &[-s, s], 1, &g).map_err(fail)).collect::<Result<Vec<_>, _>>()?;
    let decreasing = r.windows(2).all(|w| w[1] < w[0]);
    check(decreasing && r[2] < MOLECULAR_TOL, format!("residuals at s=20,40,80: {:.3e}, {:.3e}, {:.3e}", r[0], r[1], r[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn titles_cover_every_criterion() {
        assert!((1..=CRITERIA).all(|id| title(id) != "unknown"));
        assert!(!run_criterion(0).passed);
    }

    #[test]
    fn floor_comparison() {
        assert!(not_worse(1e-3, 1e-4));
        assert!(!not_worse(1e-4, 1e-3));
        assert!(not_worse(1e-15, 2e-15));
    }
}
