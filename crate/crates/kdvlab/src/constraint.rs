//! The power-sum moment system behind constrained minimization of E_{n+1}.
//!
//! A multisoliton with parameters β has E_m = s_m Σ β^{2m+1} with
//! s_m = (−1)^{m+1} 2^{2m+1}/(2m+1). Solving for β given e is a Newton
//! iteration on the normalized moments p_m = e_m / s_m.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::scalar::Real;

/// Residual tolerance (relative, per moment) for Newton convergence.
const NEWTON_TOL: f64 = 1e-13;
/// Relative residual accepted for moments not used by the Newton system.
const CONSISTENCY_TOL: f64 = 1e-9;
const MAX_NEWTON_STEPS: usize = 200;
/// Share of the first moment below which the smallest β is treated as zero.
const NEGLIGIBLE_MOMENT: f64 = 1e-10;
/// Relative gap below which two β are treated as colliding.
const COLLISION_GAP: f64 = 1e-6;
/// Largest degree searched by the relaxed and general-n routines.
pub const MAX_DEGREE: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("constraint vector is empty")]
    Empty,
    #[error("constraint vector has a non-finite entry")]
    NonFinite,
    #[error("e is not attained by a multisoliton of degree at most n")]
    NotInMnn,
    #[error("Newton iteration did not converge in {0} damped steps")]
    Diverged(usize),
    #[error("no multiplicity pattern of total degree at most {0} attains e")]
    InfeasibleForDegree(usize),
    #[error("degree {requested} is below the constraint count {n}")]
    DegreeTooSmall { requested: usize, n: usize },
    #[error("β values must be positive and distinct")]
    SingularVandermonde,
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("point-mass formula needs e1 > 0 and e2 >= 0")]
    PointMassDomain,
}

/// Region of constraint space, following the n = 2 phase diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    InteriorMnn,
    BoundaryMnn(usize),
    Gas(usize),
    PointMass,
    Infeasible,
    Origin,
    /// General-n constraint vectors that no solver route attains up to [`MAX_DEGREE`].
    Unresolved,
}

impl RegionLabel {
    /// The degree carried by the label (N for boundary strata, N_min for gas).
    pub fn degree(&self) -> Option<usize> {
        match *self {
            Self::BoundaryMnn(n) | Self::Gas(n) => Some(n),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::InteriorMnn => "InteriorMnn",
            Self::BoundaryMnn(_) => "BoundaryMnn",
            Self::Gas(_) => "Gas",
            Self::PointMass => "PointMass",
            Self::Infeasible => "Infeasible",
            Self::Origin => "Origin",
            Self::Unresolved => "Unresolved",
        }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.degree() {
            Some(n) => write!(f, "{}({n})", self.tag()),
            None => write!(f, "{}", self.tag()),
        }
    }
}

/// One β value with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedBeta<T> {
    pub value: T,
    pub mult: usize,
}

impl<T> WeightedBeta<T> {
    pub fn simple(value: T) -> Self {
        Self { value, mult: 1 }
    }
}

/// Solved β parameters, minimum value C(e), multipliers λ = ∇C and region.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimizerReport<T> {
    pub betas: Vec<WeightedBeta<T>>,
    pub c_value: T,
    pub multipliers: Vec<T>,
    pub region: RegionLabel,
    /// Set when the multipliers were taken on a boundary stratum.
    pub one_sided: bool,
}

impl<T: Real> MinimizerReport<T> {
    pub fn total_degree(&self) -> usize {
        self.betas.iter().map(|b| b.mult).sum()
    }

    pub fn distinct_values(&self) -> Vec<T> {
        self.betas.iter().map(|b| b.value).collect()
    }

    /// β listed with repetition, decreasing.
    pub fn expanded(&self) -> Vec<T> {
        self.betas.iter().flat_map(|b| std::iter::repeat_n(b.value, b.mult)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = RawReport {
            betas: self.betas.iter().map(|b| RawBeta { value: b.value.as_f64(), mult: b.mult }).collect(),
            c: self.c_value.as_f64(),
            lambda: self.multipliers.iter().map(|l| l.as_f64()).collect(),
            region: self.region.to_string(),
        };
        serde_json::to_value(raw).expect("plain report serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RawBeta {
    value: f64,
    mult: usize,
}

#[derive(Serialize, Deserialize)]
struct RawReport {
    betas: Vec<RawBeta>,
    #[serde(rename = "C")]
    c: f64,
    lambda: Vec<f64>,
    region: String,
}

/// s_m = (−1)^{m+1} 2^{2m+1}/(2m+1).
pub fn energy_scale<T: Real>(m: usize) -> T {
    let sign = if m % 2 == 1 { T::one() } else { -T::one() };
    sign * T::lit(2.0).powi(2 * m as i32 + 1) / T::of_usize(2 * m + 1)
}

fn power_sum<T: Real>(betas: &[WeightedBeta<T>], m: usize) -> T {
    betas.iter().map(|b| T::of_usize(b.mult) * b.value.powi(2 * m as i32 + 1)).sum()
}

/// e_m = s_m Σ mult·β^{2m+1} for m = 1..n.
pub fn constraints_of_betas<T: Real>(betas: &[WeightedBeta<T>], n: usize) -> Vec<T> {
    (1..=n).map(|m| energy_scale::<T>(m) * power_sum(betas, m)).collect()
}

/// E_{n+1} of the (relaxed) multisoliton, i.e. C(e) at its solution.
pub fn next_energy<T: Real>(betas: &[WeightedBeta<T>], n: usize) -> T {
    energy_scale::<T>(n + 1) * power_sum(betas, n + 1)
}

fn validate<T: Real>(e: &[T]) -> Result<(), ConstraintError> {
    if e.is_empty() {
        return Err(ConstraintError::Empty);
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(ConstraintError::NonFinite);
    }
    Ok(())
}

/// Normalized moments p_m = e_m / s_m; positive for any nonzero multisoliton.
fn moments<T: Real>(e: &[T]) -> Vec<T> {
    e.iter().enumerate().map(|(i, &v)| v / energy_scale::<T>(i + 1)).collect()
}

#[derive(Debug)]
enum Newton<T> {
    Converged(Vec<T>),
    Collision,
    Vanishing,
    Stalled,
}

/// Weighted power-sum system Σ_j w_j x_j^{2m+1} = p_m, m = 1..K, K = number of unknowns,
/// posed in z = ln x with log residuals so that positivity is automatic.
struct PowerSystem<'a, T> {
    targets: &'a [T],
    weights: &'a [T],
}

impl<T: Real> PowerSystem<'_, T> {
    fn sums(&self, z: &[T], i: usize) -> T {
        let deg = T::of_usize(2 * i + 3);
        z.iter().zip(self.weights).map(|(&v, &w)| w * (deg * v).exp()).sum()
    }

    fn residual(&self, z: &[T]) -> Vec<T> {
        self.targets.iter().enumerate().map(|(i, &p)| self.sums(z, i).ln() - p.ln()).collect()
    }

    /// J_mj = (2m+1) w_j x_j^{2m+1} / Σ_k w_k x_k^{2m+1}.
    fn jacobian(&self, z: &[T]) -> Vec<T> {
        let k = z.len();
        let mut jac = vec![T::zero(); k * k];
        for i in 0..self.targets.len() {
            let deg = T::of_usize(2 * i + 3);
            let s = self.sums(z, i);
            for j in 0..k {
                jac[i * k + j] = deg * self.weights[j] * (deg * z[j]).exp() / s;
            }
        }
        jac
    }

    fn sq_norm(r: &[T]) -> T {
        r.iter().map(|&v| v * v).sum()
    }

    fn max_abs(r: &[T]) -> T {
        r.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Levenberg–Marquardt with Nielsen's damping update, then Newton polish.
    fn solve(&self, x0: Vec<T>) -> Newton<T> {
        let k = x0.len();
        let tol = T::lit(NEWTON_TOL);
        let max_step = T::lit(2.0);
        let mut z: Vec<T> = x0.iter().map(|v| v.ln()).collect();
        let mut r = self.residual(&z);
        if r.iter().any(|v| !v.is_finite()) {
            return Newton::Stalled;
        }
        let mut mu = T::lit(1e-3);
        let mut nu = T::lit(2.0);
        let mut steps = 0;
        while Self::max_abs(&r) >= tol && steps < MAX_NEWTON_STEPS * 5 {
            steps += 1;
            let jac = self.jacobian(&z);
            let mut jtj = vec![T::zero(); k * k];
            let mut g = vec![T::zero(); k];
            for a in 0..k {
                for i in 0..k {
                    g[a] = g[a] + jac[i * k + a] * r[i];
                }
                for b in 0..k {
                    jtj[a * k + b] = (0..k).map(|i| jac[i * k + a] * jac[i * k + b]).sum();
                }
            }
            let mut damped = jtj.clone();
            for a in 0..k {
                damped[a * k + a] = damped[a * k + a] + mu;
            }
            let Some(mut dz) = linalg::solve(damped, g.iter().map(|&v| -v).collect()) else {
                mu = mu * nu;
                nu = nu * T::lit(2.0);
                continue;
            };
            let len = Self::max_abs(&dz);
            if len > max_step {
                dz.iter_mut().for_each(|v| *v = *v * max_step / len);
            }
            let trial: Vec<T> = z.iter().zip(&dz).map(|(&a, &d)| a + d).collect();
            let rt = self.residual(&trial);
            let predicted: T = dz.iter().zip(&g).map(|(&d, &gi)| d * (mu * d - gi)).sum();
            let gain = (Self::sq_norm(&r) - Self::sq_norm(&rt)) / predicted;
            if rt.iter().all(|v| v.is_finite()) && gain > T::zero() {
                z = trial;
                r = rt;
                let c = T::lit(2.0) * gain - T::one();
                mu = mu * T::lit(1.0 / 3.0).max(T::one() - c * c * c);
                nu = T::lit(2.0);
            } else {
                mu = mu * nu;
                nu = nu * T::lit(2.0);
            }
            if mu > T::lit(1e20) {
                break;
            }
        }
        if Self::max_abs(&r) >= tol {
            return self.classify_failure(&z);
        }
        // two undamped steps squeeze out the last digits
        for _ in 0..2 {
            if let Some(dz) = linalg::solve(self.jacobian(&z), r.iter().map(|&v| -v).collect()) {
                let trial: Vec<T> = z.iter().zip(&dz).map(|(&a, &d)| a + d).collect();
                let rt = self.residual(&trial);
                if Self::max_abs(&rt) <= Self::max_abs(&r) {
                    z = trial;
                    r = rt;
                }
            }
        }
        let x: Vec<T> = z.iter().map(|v| v.exp()).collect();
        let top = x.iter().fold(T::zero(), |m, &v| m.max(v));
        let mut sorted = x.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        if sorted.windows(2).any(|w| w[0] - w[1] < T::lit(COLLISION_GAP) * top) {
            return Newton::Collision;
        }
        Newton::Converged(x)
    }

    fn classify_failure(&self, z: &[T]) -> Newton<T> {
        let x: Vec<T> = z.iter().map(|v| v.exp()).collect();
        let top = x.iter().fold(T::zero(), |m, &v| m.max(v));
        let bottom = x.iter().fold(top, |m, &v| m.min(v));
        if bottom < T::lit(1e-3) * top {
            return Newton::Vanishing;
        }
        let mut sorted = x;
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        if sorted.windows(2).any(|w| w[0] - w[1] < T::lit(1e-3) * top) {
            return Newton::Collision;
        }
        Newton::Stalled
    }
}

/// Geometric ladder x_j = r·ρ^j matching the first two weighted moments.
fn ladder<T: Real>(targets: &[T], weights: &[T]) -> Vec<T> {
    let k = weights.len();
    let p1 = targets[0];
    if k == 1 {
        return vec![(p1 / weights[0]).cbrt()];
    }
    let s = |rho: T, p: i32| -> T { weights.iter().enumerate().map(|(j, &w)| w * rho.powi(p * j as i32)).sum() };
    let ratio_at = |rho: T| s(rho, 5) / s(rho, 3).powf(T::lit(5.0 / 3.0));
    let target = if targets.len() > 1 { targets[1] / p1.powf(T::lit(5.0 / 3.0)) } else { ratio_at(T::lit(0.5)) };
    let (mut lo, mut hi) = (T::lit(0.02), T::lit(0.98));
    let rho = if target >= ratio_at(lo) {
        lo
    } else if target <= ratio_at(hi) {
        hi
    } else {
        for _ in 0..100 {
            let mid = (lo + hi) * T::lit(0.5);
            if ratio_at(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * T::lit(0.5)
    };
    let r = (p1 / s(rho, 3)).cbrt();
    (0..k).map(|j| r * rho.powi(j as i32)).collect()
}

/// Starting points tried in order: the moment-matched ladder, then fixed ladders.
fn initial_guesses<T: Real>(targets: &[T], weights: &[T]) -> Vec<Vec<T>> {
    let mut guesses = vec![ladder(targets, weights)];
    let k = weights.len();
    for &rho in &[0.3, 0.6, 0.85] {
        let rho = T::lit(rho);
        let s3: T = weights.iter().enumerate().map(|(j, &w)| w * rho.powi(3 * j as i32)).sum();
        let r = (targets[0] / s3).cbrt();
        guesses.push((0..k).map(|j| r * rho.powi(j as i32)).collect());
    }
    guesses
}

/// Solves the first K = weights.len() moments and checks the remaining ones.
/// Returns (value, weight index) pairs in decreasing value order.
fn solve_pattern<T: Real>(p: &[T], weights: &[T], inits: &[Vec<T>]) -> Result<Vec<(T, usize)>, Newton<T>> {
    let k = weights.len();
    let sys = PowerSystem { targets: &p[..k], weights };
    let mut last = Newton::Stalled;
    for init in inits {
        match sys.solve(init.clone()) {
            Newton::Converged(x) => {
                let consistent = (k..p.len()).all(|i| {
                    let s: T = x.iter().zip(weights).map(|(&v, &w)| w * v.powi(2 * i as i32 + 3)).sum();
                    ((s - p[i]) / p[i]).abs() < T::lit(CONSISTENCY_TOL)
                });
                if !consistent {
                    return Err(Newton::Stalled);
                }
                let mut pairs: Vec<(T, usize)> = x.into_iter().zip(0..k).collect();
                pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
                return Ok(pairs);
            }
            other => last = other,
        }
    }
    Err(last)
}

fn report_for<T: Real>(betas: Vec<WeightedBeta<T>>, n: usize, region: RegionLabel) -> MinimizerReport<T> {
    let mut report = MinimizerReport { c_value: next_energy(&betas, n), betas, multipliers: Vec::new(), region, one_sided: false };
    let g = grad_c(&report, n);
    report.multipliers = g.lambda;
    report.one_sided = g.one_sided;
    report
}

fn origin_report<T: Real>(n: usize) -> MinimizerReport<T> {
    MinimizerReport { betas: Vec::new(), c_value: T::zero(), multipliers: vec![T::zero(); n], region: RegionLabel::Origin, one_sided: true }
}

/// Finds the unique distinct β (degree N ≤ n) attaining e, with C(e) and ∇C.
pub fn solve_betas<T: Real>(e: &[T]) -> Result<MinimizerReport<T>, ConstraintError> {
    validate(e)?;
    let n = e.len();
    if e.iter().all(|v| *v == T::zero()) {
        return Ok(origin_report(n));
    }
    let p = moments(e);
    if p.iter().any(|&v| !(v > T::zero())) {
        return Err(ConstraintError::NotInMnn);
    }
    let mut diverged = false;
    let mut fallback = None;
    for k in (1..=n).rev() {
        let weights = vec![T::one(); k];
        match solve_pattern(&p, &weights, &initial_guesses(&p[..k], &weights)) {
            Ok(pairs) => {
                let x: Vec<T> = pairs.into_iter().map(|(v, _)| v).collect();
                let region = if k == n { RegionLabel::InteriorMnn } else { RegionLabel::BoundaryMnn(k) };
                let report = report_for(x.iter().copied().map(WeightedBeta::simple).collect(), n, region);
                // a vanishing smallest β means e sits on a lower stratum
                if k > 1 && x[k - 1].powi(3) < T::lit(NEGLIGIBLE_MOMENT) * p[0] {
                    fallback.get_or_insert(report);
                    continue;
                }
                return Ok(report);
            }
            Err(Newton::Stalled) if k == n => diverged = true,
            Err(_) => {}
        }
    }
    if diverged {
        log::debug!("full-dimension Newton stalled before dimension reduction");
    }
    fallback.ok_or(ConstraintError::NotInMnn)
}

/// Newton on the full n×n system from a caller-supplied start (used by uniqueness probes).
pub fn solve_betas_from<T: Real>(e: &[T], init: &[T]) -> Result<Vec<T>, ConstraintError> {
    validate(e)?;
    if init.len() != e.len() {
        return Err(ConstraintError::WrongLength { expected: e.len(), got: init.len() });
    }
    let p = moments(e);
    let weights = vec![T::one(); e.len()];
    let sys = PowerSystem { targets: &p, weights: &weights };
    match sys.solve(init.to_vec()) {
        Newton::Converged(mut x) => {
            x.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            Ok(x)
        }
        _ => Err(ConstraintError::Diverged(MAX_NEWTON_STEPS)),
    }
}

/// Multipliers λ = ∇C(e) of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientC<T> {
    pub lambda: Vec<T>,
    /// True on boundary strata, where only the reduced derivative exists.
    pub one_sided: bool,
}

/// λ_j = ∂C/∂e_j. With N̄ = n distinct values these are the Vieta coefficients
/// λ_j = −2^{2(n+1−j)} e_{n+1−j}(β̄²); on lower strata the same polynomial identity
/// is solved as an N̄×N̄ system in the reduced variables and the rest are zero.
pub fn grad_c<T: Real>(report: &MinimizerReport<T>, n: usize) -> GradientC<T> {
    let values: Vec<T> = report.betas.iter().map(|b| b.value * b.value).collect();
    let k = values.len();
    if k == 0 {
        return GradientC { lambda: vec![T::zero(); n], one_sided: true };
    }
    if k == n {
        let e = linalg::elementary_symmetric(&values);
        let lambda = (1..=n).map(|j| -T::lit(2.0).powi(2 * (n + 1 - j) as i32) * e[n + 1 - j]).collect();
        return GradientC { lambda, one_sided: false };
    }
    // Σ_j λ_j (−1)^{j+1} 2^{2j+1} x^{j−1} = (−1)^n 2^{2n+3} x^n at each x = β̄²
    let mut a = vec![T::zero(); k * k];
    let mut b = vec![T::zero(); k];
    for (row, &x) in values.iter().enumerate() {
        for j in 1..=k {
            let sign = if j % 2 == 1 { T::one() } else { -T::one() };
            a[row * k + j - 1] = sign * T::lit(2.0).powi(2 * j as i32 + 1) * x.powi(j as i32 - 1);
        }
        let sign = if n.is_multiple_of(2) { T::one() } else { -T::one() };
        b[row] = sign * T::lit(2.0).powi(2 * n as i32 + 3) * x.powi(n as i32);
    }
    let mut lambda = linalg::solve(a, b).unwrap_or_else(|| vec![T::nan(); k]);
    lambda.resize(n, T::zero());
    GradientC { lambda, one_sided: true }
}

/// B(e₁) = (32/5)(3/8)^{5/3} e₁^{5/3}: the n = 2 feasibility edge is e₂ = −B.
pub fn gas_threshold<T: Real>(e1: T) -> T {
    T::lit(32.0 / 5.0) * T::lit(3.0 / 8.0).powf(T::lit(5.0 / 3.0)) * e1.powf(T::lit(5.0 / 3.0))
}

/// Region of e; closed form for n = 2, solver outcomes otherwise.
pub fn classify<T: Real>(e: &[T]) -> RegionLabel {
    if e.len() == 2 {
        classify_closed_form(e[0], e[1])
    } else {
        classify_by_solver(e)
    }
}

pub fn classify_closed_form<T: Real>(e1: T, e2: T) -> RegionLabel {
    if !e1.is_finite() || !e2.is_finite() || e1 < T::zero() {
        return RegionLabel::Infeasible;
    }
    if e1 == T::zero() {
        return if e2 == T::zero() { RegionLabel::Origin } else { RegionLabel::Infeasible };
    }
    if e2 >= T::zero() {
        return RegionLabel::PointMass;
    }
    let b = gas_threshold(e1);
    let tol = T::lit(1e-12) * b;
    if e2 < -b - tol {
        RegionLabel::Infeasible
    } else if (e2 + b).abs() <= tol {
        RegionLabel::BoundaryMnn(1)
    } else if e2 < -T::lit(2.0).powf(T::lit(-2.0 / 3.0)) * b {
        RegionLabel::InteriorMnn
    } else {
        let x = (b / e2.abs()).powf(T::lit(1.5)).as_f64();
        RegionLabel::Gas(x.floor() as usize + 1)
    }
}

/// Label by which solver route attains e: the distinct branch, then relaxed patterns of growing degree.
pub fn classify_by_solver<T: Real>(e: &[T]) -> RegionLabel {
    if validate(e).is_err() {
        return RegionLabel::Infeasible;
    }
    if e.iter().all(|v| *v == T::zero()) {
        return RegionLabel::Origin;
    }
    if let Ok(report) = solve_betas(e) {
        return report.region;
    }
    let n = e.len();
    for degree in n + 1..=MAX_DEGREE {
        if relaxed_minimize(e, degree).is_ok() {
            return RegionLabel::Gas(degree);
        }
    }
    RegionLabel::Unresolved
}

/// Tangent x′ keeping the first n odd power sums fixed while β_{n+1} moves with
/// unit speed, and the resulting derivative of the (2n+3)-power sum.
pub fn wiggle_direction<T: Real>(betas: &[T], n: usize) -> Result<(Vec<T>, T), ConstraintError> {
    if betas.len() != n + 1 {
        return Err(ConstraintError::WrongLength { expected: n + 1, got: betas.len() });
    }
    let scale = betas.iter().fold(T::zero(), |m, b| m.max(b.abs()));
    for (i, &a) in betas.iter().enumerate() {
        if !(a > T::zero()) || betas[..i].iter().any(|&b| (a - b).abs() <= T::lit(1e-12) * scale) {
            return Err(ConstraintError::SingularVandermonde);
        }
    }
    let last = betas[n];
    let mut a = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    for m in 1..=n {
        let c = T::of_usize(2 * m + 1);
        for j in 0..n {
            a[(m - 1) * n + j] = c * betas[j].powi(2 * m as i32);
        }
        rhs[m - 1] = -c * last.powi(2 * m as i32);
    }
    let tangent = linalg::solve(a, rhs).ok_or(ConstraintError::SingularVandermonde)?;
    let deg = 2 * n as i32 + 2;
    let d_next = T::of_usize(2 * n + 3) * (betas[..n].iter().zip(&tangent).map(|(&b, &t)| b.powi(deg) * t).sum::<T>() + last.powi(deg));
    Ok((tangent, d_next))
}

/// (2n+3) β_{n+1}² Π_j (β_{n+1}² − β_j²), the closed form of `wiggle_direction`'s derivative.
pub fn wiggle_derivative_formula<T: Real>(betas: &[T]) -> T {
    let n = betas.len() - 1;
    let last2 = betas[n] * betas[n];
    T::of_usize(2 * n + 3) * last2 * betas[..n].iter().map(|&b| last2 - b * b).fold(T::one(), |p, v| p * v)
}

/// Compositions of at most `total` into exactly `parts` positive integers.
fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, budget: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            out.push(prefix.clone());
            return;
        }
        for m in 1..=budget.saturating_sub(parts - 1) {
            prefix.push(m);
            rec(parts - 1, budget - m, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts <= total {
        rec(parts, total, &mut Vec::new(), &mut out);
    }
    out
}

/// Minimizes C over β₁ ≥ … ≥ β_N ≥ 0 with the n constraints, allowing repeated
/// values: candidates are at most n distinct values with multiplicities of total
/// at most N, and the feasible candidate with least C wins.
pub fn relaxed_minimize<T: Real>(e: &[T], degree: usize) -> Result<MinimizerReport<T>, ConstraintError> {
    validate(e)?;
    let n = e.len();
    if degree == n {
        return solve_betas(e);
    }
    if degree < n {
        return Err(ConstraintError::DegreeTooSmall { requested: degree, n });
    }
    if e.iter().all(|v| *v == T::zero()) {
        return Ok(origin_report(n));
    }
    let p = moments(e);
    if p.iter().any(|&v| !(v > T::zero())) {
        return Err(ConstraintError::InfeasibleForDegree(degree));
    }
    let patterns: Vec<Vec<usize>> = (1..=n.min(degree)).flat_map(|parts| compositions(parts, degree)).collect();
    let best = patterns
        .par_iter()
        .filter_map(|pattern| {
            let weights: Vec<T> = pattern.iter().map(|&m| T::of_usize(m)).collect();
            let pairs = solve_pattern(&p, &weights, &initial_guesses(&p[..weights.len()], &weights)).ok()?;
            let betas: Vec<WeightedBeta<T>> = pairs.into_iter().map(|(value, i)| WeightedBeta { value, mult: pattern[i] }).collect();
            let c = next_energy(&betas, n);
            Some((c, betas))
        })
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let Some((_, betas)) = best else {
        return Err(ConstraintError::InfeasibleForDegree(degree));
    };
    let total: usize = betas.iter().map(|b| b.mult).sum();
    let repeated = betas.iter().any(|b| b.mult > 1);
    let region = if repeated {
        RegionLabel::Gas(total.max(n + 1))
    } else if betas.len() == n {
        RegionLabel::InteriorMnn
    } else {
        RegionLabel::BoundaryMnn(betas.len())
    };
    Ok(report_for(betas, n, region))
}

/// Infimum e₂²/e₁ of E₃ in the point-mass regime with the optimizing log|a| moments
/// γ₀ = (π/4)e₁ and γ₁ = (π/16)e₂.
pub fn point_mass_infimum<T: Real>(e1: T, e2: T) -> Result<(T, T, T), ConstraintError> {
    if !(e1 > T::zero()) || !(e2 >= T::zero()) {
        return Err(ConstraintError::PointMassDomain);
    }
    Ok((e2 * e2 / e1, T::FRAC_PI_4() * e1, T::PI() / T::lit(16.0) * e2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(v: &[f64]) -> Vec<WeightedBeta<f64>> {
        v.iter().copied().map(WeightedBeta::simple).collect()
    }

    #[test]
    fn forward_map_examples() {
        let e = constraints_of_betas(&simple(&[1.0]), 2);
        assert!((e[0] - 8.0 / 3.0).abs() < 1e-15 && (e[1] + 32.0 / 5.0).abs() < 1e-14);
        let e = constraints_of_betas(&simple(&[2.0, 1.0]), 2);
        assert!((e[0] - 24.0).abs() < 1e-13 && (e[1] + 211.2).abs() < 1e-12);
        assert_eq!(constraints_of_betas::<f64>(&[], 3), vec![0.0; 3]);
    }

    #[test]
    fn solves_two_soliton() {
        let r = solve_betas::<f64>(&[24.0, -211.2]).unwrap();
        assert_eq!(r.region, RegionLabel::InteriorMnn);
        let b = r.distinct_values();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12, "{b:?}");
        assert!((r.c_value - 128.0 / 7.0 * 129.0).abs() < 1e-9 * r.c_value);
        assert!(r.multipliers.iter().all(|&l| l < 0.0));
    }

    #[test]
    fn boundary_is_single_soliton() {
        let r = solve_betas::<f64>(&[8.0 / 3.0, -32.0 / 5.0]).unwrap();
        assert_eq!(r.region, RegionLabel::BoundaryMnn(1));
        assert_eq!(r.betas.len(), 1);
        assert!((r.betas[0].value - 1.0).abs() < 1e-12);
        assert!(r.one_sided);
    }

    #[test]
    fn origin_and_gas() {
        let r = solve_betas::<f64>(&[0.0, 0.0, 0.0]).unwrap();
        assert!(r.betas.is_empty() && r.c_value == 0.0 && r.region == RegionLabel::Origin);
        assert_eq!(solve_betas::<f64>(&[24.0, -100.0]), Err(ConstraintError::NotInMnn));
    }

    #[test]
    fn one_constraint_multiplier() {
        let r = solve_betas::<f64>(&[8.0 / 3.0]).unwrap();
        assert!((r.multipliers[0] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_regions() {
        assert_eq!(classify::<f64>(&[24.0, -211.2]), RegionLabel::InteriorMnn);
        assert_eq!(classify::<f64>(&[24.0, -100.0]), RegionLabel::Gas(4));
        assert_eq!(classify::<f64>(&[1.0, 1.0]), RegionLabel::PointMass);
        assert_eq!(classify::<f64>(&[0.0, 0.0]), RegionLabel::Origin);
        assert_eq!(classify::<f64>(&[-1.0, -1.0]), RegionLabel::Infeasible);
        assert_eq!(classify::<f64>(&[24.0, -300.0]), RegionLabel::Infeasible);
        let b = gas_threshold(24.0f64);
        assert!((b - 6.4 * 9.0f64.powf(5.0 / 3.0)).abs() < 1e-10, "{b}");
        assert_eq!(classify::<f64>(&[24.0, -b]), RegionLabel::BoundaryMnn(1));
        assert_eq!(classify::<f64>(&[8.0 / 3.0, -32.0 / 5.0]), RegionLabel::BoundaryMnn(1));
    }

    #[test]
    fn solver_classification_agrees_in_the_interior() {
        assert_eq!(classify_by_solver::<f64>(&[24.0, -211.2]), RegionLabel::InteriorMnn);
        assert_eq!(classify_by_solver::<f64>(&[24.0, -100.0]), RegionLabel::Gas(4));
    }

    #[test]
    fn wiggle_examples() {
        let (_, d) = wiggle_direction::<f64>(&[1.0, 2.0], 1).unwrap();
        assert!((d - 60.0).abs() < 1e-12);
        let (_, d) = wiggle_direction::<f64>(&[3.0, 2.0, 1.0], 2).unwrap();
        assert!((d - 168.0).abs() < 1e-10);
        assert!((wiggle_derivative_formula::<f64>(&[3.0, 2.0, 1.0]) - 168.0).abs() < 1e-12);
        assert_eq!(wiggle_direction::<f64>(&[1.0, 1.0], 1), Err(ConstraintError::SingularVandermonde));
    }

    #[test]
    fn relaxed_gas_example() {
        let r = relaxed_minimize::<f64>(&[24.0, -100.0], 4).unwrap();
        assert!(r.betas.len() <= 2);
        assert!(r.total_degree() <= 4);
        let e = constraints_of_betas(&r.betas, 2);
        assert!(((e[0] - 24.0) / 24.0).abs() < 1e-9 && ((e[1] + 100.0) / 100.0).abs() < 1e-9, "{e:?}");
        assert_eq!(r.region, RegionLabel::Gas(4));
    }

    #[test]
    fn relaxed_beats_distinct_configuration() {
        let betas = simple(&[3.0, 2.0, 1.0, 0.5]);
        let e = constraints_of_betas(&betas, 2);
        let r = relaxed_minimize(&e, 4).unwrap();
        assert!(r.c_value <= next_energy(&betas, 2) + 1e-9);
    }

    #[test]
    fn relaxed_degenerate_call_delegates() {
        assert_eq!(relaxed_minimize::<f64>(&[24.0, -211.2], 2).unwrap(), solve_betas::<f64>(&[24.0, -211.2]).unwrap());
    }

    #[test]
    fn point_mass_examples() {
        let sp = std::f64::consts::PI.sqrt();
        let (v, g0, g1) = point_mass_infimum::<f64>(sp / 4.0, sp).unwrap();
        assert!((v - 4.0 * sp).abs() < 1e-14);
        assert!((g0 - std::f64::consts::FRAC_PI_4 * sp / 4.0).abs() < 1e-15);
        assert!((g1 - std::f64::consts::PI / 16.0 * sp).abs() < 1e-15);
        assert_eq!(point_mass_infimum::<f64>(1.0, 0.0).unwrap().0, 0.0);
        assert_eq!(point_mass_infimum::<f64>(1.0, 2.0).unwrap().0, 4.0);
        assert!(point_mass_infimum::<f64>(0.0, 1.0).is_err());
    }

    #[test]
    fn report_json_layout() {
        let r = solve_betas::<f64>(&[24.0, -211.2]).unwrap();
        let v = r.to_json();
        assert_eq!(v["region"], "InteriorMnn");
        assert_eq!(v["betas"][0]["mult"], 1);
        assert!(v["C"].as_f64().unwrap() > 2358.0);
        assert_eq!(v["lambda"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn single_precision_solve() {
        let r = solve_betas(&[24.0f32, -211.2]);
        let r = r.unwrap();
        assert!((r.betas[0].value - 2.0).abs() < 1e-4);
    }
}
