//! Forward scattering for −∂² + u: Jost solutions, a(k), bound states and trace sums.
//!
//! Jost solutions are propagated with a fourth-order Magnus scheme whose Gauss-point
//! samples come from spectral shifts of the grid function, so the integrator sees the
//! same band-limited potential as every other module.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::constraint::energy_scale;
use crate::energy::{eval_energy, EnergyError};
use crate::field::{FieldError, GridFunction};
use crate::scalar::Real;

/// Magnus substeps per grid cell.
pub const DEFAULT_SUBSTEPS: usize = 2;
/// Substeps for a(iκ) during bound-state refinement.
const BOUND_SUBSTEPS: usize = 4;
pub const DEFAULT_K_MAX: f64 = 20.0;
pub const DEFAULT_K_POINTS: usize = 512;
/// Target accuracy for bound-state refinement on a(iκ).
pub const BOUND_STATE_TOL: f64 = 1e-10;
/// Tail share of a moment above which a warning is logged.
pub const TAIL_WARNING: f64 = 1e-2;
const GAUSS_ORDER: usize = 8;

#[derive(Debug, Error)]
pub enum ScatterError {
    #[error("k = 0 is excluded")]
    ZeroFrequency,
    #[error("k must lie in the closed upper half-plane")]
    LowerHalfPlane,
    #[error("potential has not decayed at the edges (tail ratio {0:.3e})")]
    NotDecayed(f64),
    #[error("k is within {0:.3e} of a pole of the Blaschke product")]
    PoleProximity(f64),
    #[error("β = {0} is already a bound state")]
    DuplicateBound(f64),
    #[error("bound state near κ = {0} could not be refined; refine the grid")]
    BracketFailed(f64),
    #[error("frequency grid needs k_max > 0 and at least {GAUSS_ORDER} points")]
    BadFrequencyGrid,
    #[error("malformed scattering CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Gauss–Legendre nodes and weights on [−1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Positive frequencies with composite Gauss–Legendre weights on (0, k_max].
///
/// Panels are dyadic on (0, 1] and uniform above, so small-k behavior of log|a| is resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    k_max: T,
}

impl<T: Real> FrequencyGrid<T> {
    /// `points` is rounded down to a multiple of the panel order (8).
    pub fn new(k_max: T, points: usize) -> Result<Self, ScatterError> {
        let panels = points / GAUSS_ORDER;
        if !(k_max > T::zero()) || !k_max.is_finite() || panels == 0 {
            return Err(ScatterError::BadFrequencyGrid);
        }
        let k_max_f = k_max.as_f64();
        let mut edges = vec![0.0];
        let dyadic = if k_max_f > 1.0 && panels > 8 { 7.min(panels / 4) } else { 0 };
        for j in (0..dyadic).rev() {
            edges.push(0.5f64.powi(j as i32));
        }
        let start = *edges.last().unwrap();
        let rest = panels - dyadic;
        for j in 1..=rest {
            edges.push(start + (k_max_f - start) * j as f64 / rest as f64);
        }
        Self::from_edges(&edges)
    }

    /// Gauss–Legendre panels between consecutive edges; edges must start at 0 and increase.
    pub fn from_edges(edges: &[f64]) -> Result<Self, ScatterError> {
        let increasing = edges.windows(2).all(|w| w[1] > w[0]);
        if edges.len() < 2 || edges[0] != 0.0 || !increasing || !edges.iter().all(|e| e.is_finite()) {
            return Err(ScatterError::BadFrequencyGrid);
        }
        let rule = gauss_legendre(GAUSS_ORDER);
        let mut nodes = Vec::with_capacity(edges.len() * GAUSS_ORDER);
        let mut weights = Vec::with_capacity(edges.len() * GAUSS_ORDER);
        for w in edges.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for &(x, wt) in rule.iter().rev() {
                nodes.push(T::lit(mid + half * x));
                weights.push(T::lit(half * wt));
            }
        }
        let k_max = T::lit(*edges.last().unwrap());
        Ok(Self { nodes, weights, k_max })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn k_max(&self) -> T {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl Default for FrequencyGrid<f64> {
    fn default() -> Self {
        Self::new(DEFAULT_K_MAX, DEFAULT_K_POINTS).expect("default grid is valid")
    }
}

/// Potential sampled at the two Gauss points of every Magnus substep across [−L, L].
pub struct JostPotential<T: Real> {
    left: T,
    step: T,
    samples: Vec<(T, T)>,
    substeps: usize,
}

impl<T: Real> JostPotential<T> {
    pub fn new(u: &GridFunction<T>, substeps: usize) -> Result<Self, ScatterError> {
        if !u.is_line_valid() {
            return Err(ScatterError::NotDecayed(u.tail_ratio().as_f64()));
        }
        let substeps = substeps.max(1);
        let grid = u.grid();
        let step = grid.spacing() / T::of_usize(substeps);
        let offset = T::lit(3.0f64.sqrt() / 6.0);
        let half = T::lit(0.5);
        let shifted: Vec<(Vec<T>, Vec<T>)> = (0..substeps)
            .into_par_iter()
            .map(|r| {
                let base = T::of_usize(r) + half;
                (u.shifted_samples((base - offset) * step), u.shifted_samples((base + offset) * step))
            })
            .collect();
        let mut samples = Vec::with_capacity(grid.points() * substeps);
        for j in 0..grid.points() {
            for (lo, hi) in &shifted {
                samples.push((lo[j], hi[j]));
            }
        }
        Ok(Self { left: -grid.half_width(), step, samples, substeps })
    }

    fn right(&self) -> T {
        self.left + self.step * T::of_usize(self.samples.len())
    }

    fn steps(&self) -> usize {
        self.samples.len()
    }

    /// Step propagator exp(±Ω) for Y = (f, f′), Ω = [[α, h],[hV̄, −α]].
    fn propagator(&self, i: usize, k2: Complex<T>, backward: bool) -> [[Complex<T>; 2]; 2] {
        let h = self.step;
        let (u1, u2) = self.samples[i];
        let vbar = Complex::from(half_sum(u1, u2)) - k2;
        let alpha = T::lit(3.0f64.sqrt() / 12.0) * h * h * (u1 - u2);
        let s2 = Complex::from(alpha * alpha) + vbar * h * h;
        let (c, sinc) = cosh_sinhc(s2);
        let sign = if backward { -T::one() } else { T::one() };
        let a = Complex::from(alpha * sign) * sinc;
        let b = sinc * (h * sign);
        let d = vbar * sinc * (h * sign);
        [[c + a, b], [d, c - a]]
    }

    /// Left Jost solution f₂ ∼ e^{−ikx} swept from −L through `steps` substeps.
    fn sweep_left(&self, k: Complex<T>, steps: usize) -> JostState<T> {
        let i: Complex<T> = Complex::i();
        let mut state = JostState { y: [Complex::from(T::one()), -i * k], log_scale: -i * k * self.left };
        let k2 = k * k;
        for s in 0..steps {
            state.apply(self.propagator(s, k2, false));
        }
        state
    }

    /// Right Jost solution f₁ ∼ e^{ikx} swept from +L back to substep index `stop`.
    fn sweep_right(&self, k: Complex<T>, stop: usize) -> JostState<T> {
        let i: Complex<T> = Complex::i();
        let mut state = JostState { y: [Complex::from(T::one()), i * k], log_scale: i * k * self.right() };
        let k2 = k * k;
        for s in (stop..self.steps()).rev() {
            state.apply(self.propagator(s, k2, true));
        }
        state
    }

    /// W[f₁, f₂] = f₁f₂′ − f₁′f₂ at grid node `node`.
    pub fn wronskian_at(&self, k: Complex<T>, node: usize) -> Complex<T> {
        let stop = node * self.substeps;
        let f2 = self.sweep_left(k, stop);
        let f1 = self.sweep_right(k, stop);
        (f1.log_scale + f2.log_scale).exp() * (f1.y[0] * f2.y[1] - f1.y[1] * f2.y[0])
    }

    /// (a, b) from f₂ = a e^{−ikx} + b e^{ikx} beyond the support of u.
    pub fn coefficients(&self, k: Complex<T>) -> (Complex<T>, Complex<T>) {
        let i: Complex<T> = Complex::i();
        let f2 = self.sweep_left(k, self.steps());
        let ik = i * k;
        let l = self.right();
        let denom = ik * T::lit(2.0);
        let a = (f2.log_scale + ik * l).exp() * (ik * f2.y[0] - f2.y[1]) / denom;
        let b = (f2.log_scale - ik * l).exp() * (ik * f2.y[0] + f2.y[1]) / denom;
        (a, b)
    }

    /// a(k) = −W[f₁, f₂]/(2ik), so that the free potential gives a ≡ 1.
    pub fn a(&self, k: Complex<T>) -> Complex<T> {
        self.coefficients(k).0
    }
}

fn half_sum<T: Real>(a: T, b: T) -> T {
    (a + b) * T::lit(0.5)
}

/// cosh(s) and sinh(s)/s as functions of s².
fn cosh_sinhc<T: Real>(s2: Complex<T>) -> (Complex<T>, Complex<T>) {
    if s2.norm() < T::lit(1e-4) {
        let one = Complex::from(T::one());
        let c = one + s2 * T::lit(0.5) * (one + s2 / T::lit(12.0) * (one + s2 / T::lit(30.0)));
        let sc = one + s2 / T::lit(6.0) * (one + s2 / T::lit(20.0) * (one + s2 / T::lit(42.0)));
        return (c, sc);
    }
    let s = s2.sqrt();
    (s.cosh(), s.sinh() / s)
}

struct JostState<T> {
    y: [Complex<T>; 2],
    log_scale: Complex<T>,
}

impl<T: Real> JostState<T> {
    fn apply(&mut self, m: [[Complex<T>; 2]; 2]) {
        let y0 = m[0][0] * self.y[0] + m[0][1] * self.y[1];
        let y1 = m[1][0] * self.y[0] + m[1][1] * self.y[1];
        let scale = y0.norm().max(y1.norm());
        if scale > T::zero() && scale.is_finite() {
            self.y = [y0 / scale, y1 / scale];
            self.log_scale = self.log_scale + Complex::from(scale.ln());
        } else {
            self.y = [y0, y1];
        }
    }
}

fn check_frequency<T: Real>(k: Complex<T>) -> Result<(), ScatterError> {
    if k.norm() == T::zero() {
        return Err(ScatterError::ZeroFrequency);
    }
    if k.im < T::zero() {
        return Err(ScatterError::LowerHalfPlane);
    }
    Ok(())
}

/// W[f₁, f₂] evaluated at the grid node nearest the middle of the domain.
pub fn jost_wronskian<T: Real>(u: &GridFunction<T>, k: Complex<T>) -> Result<Complex<T>, ScatterError> {
    jost_wronskian_at(u, k, u.grid().points() / 2)
}

/// W[f₁, f₂] evaluated at grid node `node`.
pub fn jost_wronskian_at<T: Real>(u: &GridFunction<T>, k: Complex<T>, node: usize) -> Result<Complex<T>, ScatterError> {
    check_frequency(k)?;
    let pot = JostPotential::new(u, DEFAULT_SUBSTEPS)?;
    Ok(pot.wronskian_at(k, node.min(u.grid().points())))
}

/// a(k) at a single point of the closed upper half-plane.
pub fn transmission_reciprocal_at<T: Real>(u: &GridFunction<T>, k: Complex<T>) -> Result<Complex<T>, ScatterError> {
    check_frequency(k)?;
    Ok(JostPotential::new(u, DEFAULT_SUBSTEPS)?.a(k))
}

/// Frequencies, a(k) and log|a(k)| on k > 0, plus bound-state parameters.
/// Values at −k are the conjugates of those at k.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringSample<T> {
    pub k_grid: Vec<T>,
    pub weights: Vec<T>,
    pub a_values: Vec<Complex<T>>,
    /// ½·log(1 + |b|²), which equals log|a| and stays accurate when a ≈ 1.
    pub log_abs_a: Vec<T>,
    pub bound_betas: Vec<T>,
}

impl<T: Real> ScatteringSample<T> {
    pub fn min_abs_a(&self) -> T {
        self.a_values.iter().fold(T::infinity(), |m, a| m.min(a.norm()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), ScatterError> {
        writeln!(out, "k,re_a,im_a,log_abs_a")?;
        for ((k, a), l) in self.k_grid.iter().zip(&self.a_values).zip(&self.log_abs_a) {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", k.as_f64(), a.re.as_f64(), a.im.as_f64(), l.as_f64())?;
        }
        Ok(())
    }

    /// Reads the CSV layout back; quadrature weights are not stored and come back empty.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, ScatterError> {
        let mut sample =
            Self { k_grid: Vec::new(), weights: Vec::new(), a_values: Vec::new(), log_abs_a: Vec::new(), bound_betas: Vec::new() };
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let cols = cols.map_err(|e| ScatterError::Csv(format!("line {}: {e}", lineno + 1)))?;
            if cols.len() != 4 {
                return Err(ScatterError::Csv(format!("line {}: expected 4 columns", lineno + 1)));
            }
            sample.k_grid.push(T::lit(cols[0]));
            sample.a_values.push(Complex::new(T::lit(cols[1]), T::lit(cols[2])));
            sample.log_abs_a.push(T::lit(cols[3]));
        }
        Ok(sample)
    }

    pub fn bound_states_json(&self) -> String {
        serde_json::to_string(&self.bound_betas.iter().map(|b| b.as_f64()).collect::<Vec<_>>()).expect("floats serialize")
    }
}

/// a(k) on the positive frequency grid (bound states left empty).
pub fn transmission_reciprocal<T: Real>(u: &GridFunction<T>, k_grid: &FrequencyGrid<T>) -> Result<ScatteringSample<T>, ScatterError> {
    transmission_reciprocal_with(u, k_grid, DEFAULT_SUBSTEPS)
}

pub fn transmission_reciprocal_with<T: Real>(
    u: &GridFunction<T>,
    k_grid: &FrequencyGrid<T>,
    substeps: usize,
) -> Result<ScatteringSample<T>, ScatterError> {
    let pot = JostPotential::new(u, substeps)?;
    let (a_values, log_abs_a): (Vec<Complex<T>>, Vec<T>) = k_grid
        .nodes()
        .par_iter()
        .map(|&k| {
            let (a, b) = pot.coefficients(Complex::from(k));
            (a, b.norm_sqr().ln_1p() * T::lit(0.5))
        })
        .unzip();
    Ok(ScatteringSample {
        k_grid: k_grid.nodes().to_vec(),
        weights: k_grid.weights().to_vec(),
        a_values,
        log_abs_a,
        bound_betas: Vec::new(),
    })
}

/// Full scattering sample: a(k) on the grid and the bound states.
pub fn scattering_sample<T: Real>(u: &GridFunction<T>, k_grid: &FrequencyGrid<T>) -> Result<ScatteringSample<T>, ScatterError> {
    let mut sample = transmission_reciprocal(u, k_grid)?;
    sample.bound_betas = bound_states(u)?;
    Ok(sample)
}

/// Number of eigenvalues below λ of the Dirichlet central-difference operator −D² + u.
fn sturm_count<T: Real>(diag: &[T], off: T, lambda: T) -> usize {
    let mut count = 0;
    let mut d = T::one();
    let tiny = T::min_positive_value().sqrt();
    for (j, &a) in diag.iter().enumerate() {
        d = if j == 0 { a - lambda } else { a - lambda - off * off / d };
        if d == T::zero() {
            d = -tiny;
        }
        if d < T::zero() {
            count += 1;
        }
    }
    count
}

/// Negative eigenvalues of the discretized operator, by Sturm bisection.
fn discrete_bound_states<T: Real>(u: &GridFunction<T>) -> Vec<T> {
    let h = u.grid().spacing();
    let inv = T::one() / (h * h);
    let diag: Vec<T> = u.values().iter().map(|&v| v + T::lit(2.0) * inv).collect();
    let off = -inv;
    let count = sturm_count(&diag, off, T::zero());
    let floor = u.values().iter().fold(T::zero(), |m, &v| m.min(v)) - T::one();
    (0..count)
        .into_par_iter()
        .map(|idx| {
            // idx-th eigenvalue from the bottom
            let (mut lo, mut hi) = (floor, T::zero());
            for _ in 0..200 {
                let mid = half_sum(lo, hi);
                if sturm_count(&diag, off, mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < T::lit(1e-13) * (T::one() + lo.abs()) {
                    break;
                }
            }
            (-half_sum(lo, hi)).max(T::zero()).sqrt()
        })
        .collect()
}

/// Bound-state parameters β₁ > … > β_N (eigenvalues −β²), located as zeros of κ ↦ a(iκ).
pub fn bound_states<T: Real>(u: &GridFunction<T>) -> Result<Vec<T>, ScatterError> {
    let pot = JostPotential::new(u, BOUND_SUBSTEPS)?;
    let guesses = discrete_bound_states(u);
    if guesses.is_empty() {
        return Ok(Vec::new());
    }
    let g = |kappa: T| pot.a(Complex::new(T::zero(), kappa)).re;
    let limits: Vec<(T, T)> = (0..guesses.len())
        .map(|j| {
            let upper = if j == 0 { guesses[0] * T::lit(2.0) + T::one() } else { half_sum(guesses[j - 1], guesses[j]) };
            let lower = if j + 1 < guesses.len() { half_sum(guesses[j], guesses[j + 1]) } else { guesses[j] * T::lit(1e-3) };
            (lower, upper)
        })
        .collect();
    let mut betas: Vec<T> = guesses
        .par_iter()
        .zip(limits.par_iter())
        .map(|(&guess, &(lower, upper))| refine_zero(&g, guess, lower, upper).ok_or(ScatterError::BracketFailed(guess.as_f64())))
        .collect::<Result<_, _>>()?;
    betas.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(betas)
}

/// Brackets a sign change of g near `guess` inside (lower, upper), then Illinois regula falsi.
fn refine_zero<T: Real>(g: &impl Fn(T) -> T, guess: T, lower: T, upper: T) -> Option<T> {
    let mut width = guess * T::lit(1e-3);
    let (mut lo, mut hi);
    loop {
        lo = (guess - width).max(lower);
        hi = (guess + width).min(upper);
        if g(lo).signum() != g(hi).signum() {
            break;
        }
        if lo <= lower && hi >= upper {
            return None;
        }
        width = width * T::lit(4.0);
    }
    let (mut flo, mut fhi) = (g(lo), g(hi));
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (lo * fhi - hi * flo) / (fhi - flo);
        let fx = g(x);
        if fx == T::zero() {
            return Some(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi = fhi * T::lit(0.5);
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo = flo * T::lit(0.5);
            }
            side = 1;
        }
        if hi - lo < T::lit(BOUND_STATE_TOL) * T::lit(1e-2) * (T::one() + x.abs()) {
            return Some(half_sum(lo, hi));
        }
    }
    Some(half_sum(lo, hi))
}

/// ∫_ℝ k^{2m} log|a| dk for m = 1..n, with the beyond-k_max part reported separately.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMoments<T> {
    pub values: Vec<T>,
    pub tails: Vec<T>,
}

impl<T: Real> LogMoments<T> {
    /// Moments whose tail estimate exceeds `fraction` of the total.
    pub fn tail_dominated(&self, fraction: T) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&m| self.tails[m].abs() > fraction * self.values[m].abs().max(T::min_positive_value()))
            .map(|m| m + 1)
            .collect()
    }
}

/// Tail ∫_K^∞ k^p A e^{−λk} dk from a two-point exponential fit to the last panel.
fn exponential_tail<T: Real>(k: &[T], f: &[T], power: usize) -> T {
    let n = k.len();
    if n < 2 {
        return T::zero();
    }
    let (k1, k2) = (k[n - 2], k[n - 1]);
    let (f1, f2) = (f[n - 2], f[n - 1]);
    if !(f1 > T::zero()) || !(f2 > T::zero()) || !(f2 < f1) {
        return T::zero();
    }
    let lambda = (f1 / f2).ln() / (k2 - k1);
    // ∫_K^∞ k^p e^{−λ(k−K)} dk = Σ_j p!/(p−j)! K^{p−j} / λ^{j+1}
    let mut term = k2.powi(power as i32) / lambda;
    let mut total = term;
    for j in 1..=power {
        term = term * T::of_usize(power + 1 - j) / (k2 * lambda);
        total = total + term;
    }
    f2 * total
}

/// Even moments of log|a| over ℝ: twice the positive-k quadrature plus an exponential tail.
pub fn log_a_moments<T: Real>(s: &ScatteringSample<T>, up_to_n: usize) -> LogMoments<T> {
    let mut values = Vec::with_capacity(up_to_n);
    let mut tails = Vec::with_capacity(up_to_n);
    let two = T::lit(2.0);
    for m in 1..=up_to_n {
        let body: T = s.k_grid.iter().zip(&s.weights).zip(&s.log_abs_a).map(|((&k, &w), &l)| w * k.powi(2 * m as i32) * l).sum();
        let tail = exponential_tail(&s.k_grid, &s.log_abs_a, 2 * m);
        values.push(two * (body + tail));
        tails.push(two * tail);
    }
    let moments = LogMoments { values, tails };
    for m in moments.tail_dominated(T::lit(TAIL_WARNING)) {
        log::warn!("tail estimate exceeds 1% of the k^{} log|a| moment", 2 * m);
    }
    moments
}

/// Energies and both sides of the trace identity for n = 1..up_to_n.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceCheck<T> {
    pub energies: Vec<T>,
    pub moments: LogMoments<T>,
    pub bound_betas: Vec<T>,
    pub residuals: Vec<T>,
}

impl<T: Real> TraceCheck<T> {
    pub fn relative(&self) -> Vec<T> {
        self.residuals.iter().zip(&self.energies).map(|(&r, &e)| (r / e).abs()).collect()
    }
}

/// Right-hand side (2^{2n}/π)·moment_n + s_n Σβ^{2n+1} of the trace identity.
pub fn trace_rhs<T: Real>(n: usize, moment: T, betas: &[T]) -> T {
    let sum: T = betas.iter().map(|b| b.powi(2 * n as i32 + 1)).sum();
    T::lit(2.0).powi(2 * n as i32) / T::PI() * moment + energy_scale::<T>(n) * sum
}

pub fn trace_check<T: Real>(u: &GridFunction<T>, up_to_n: usize, k_grid: &FrequencyGrid<T>) -> Result<TraceCheck<T>, ScatterError> {
    let sample = scattering_sample(u, k_grid)?;
    let moments = log_a_moments(&sample, up_to_n);
    let mut energies = Vec::with_capacity(up_to_n);
    let mut residuals = Vec::with_capacity(up_to_n);
    for n in 1..=up_to_n {
        let e = eval_energy(n, u)?;
        residuals.push(e - trace_rhs(n, moments.values[n - 1], &sample.bound_betas));
        energies.push(e);
    }
    Ok(TraceCheck { energies, moments, bound_betas: sample.bound_betas, residuals })
}

/// E_n(u) minus the trace-formula right-hand side, n = 1..up_to_n.
pub fn trace_residuals<T: Real>(u: &GridFunction<T>, up_to_n: usize, k_grid: &FrequencyGrid<T>) -> Result<Vec<T>, ScatterError> {
    Ok(trace_check(u, up_to_n, k_grid)?.residuals)
}

/// Π (k − iβ_m)/(k + iβ_m).
pub fn blaschke<T: Real>(betas: &[T], k: Complex<T>) -> Result<Complex<T>, ScatterError> {
    if k.im < T::zero() {
        return Err(ScatterError::LowerHalfPlane);
    }
    let mut value = Complex::from(T::one());
    for &b in betas {
        let pole = k + Complex::new(T::zero(), b);
        let guard = pole.norm();
        if guard < T::lit(1e-12) * (T::one() + b.abs()) {
            return Err(ScatterError::PoleProximity(guard.as_f64()));
        }
        value = value * (k - Complex::new(T::zero(), b)) / pole;
    }
    Ok(value)
}

/// Multiplies a(k) by the Blaschke factor of `new_betas` and records them as bound states.
pub fn add_bound_states<T: Real>(s: &ScatteringSample<T>, new_betas: &[T]) -> Result<ScatteringSample<T>, ScatterError> {
    for (i, &b) in new_betas.iter().enumerate() {
        let clash = |&o: &T| (o - b).abs() <= T::lit(1e-12) * b.abs().max(T::one());
        if s.bound_betas.iter().any(clash) || new_betas[..i].iter().any(clash) {
            return Err(ScatterError::DuplicateBound(b.as_f64()));
        }
    }
    let mut out = s.clone();
    for (a, &k) in out.a_values.iter_mut().zip(&s.k_grid) {
        *a = *a * blaschke(new_betas, Complex::from(k))?;
    }
    out.bound_betas.extend_from_slice(new_betas);
    out.bound_betas.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}
