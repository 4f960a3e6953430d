//! Uniform periodic grids, grid functions, spectral calculus and Sobolev norms.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::scalar::Real;

/// Fraction of nodes (split between both ends) inspected by the decay diagnostic.
const TAIL_FRACTION: f64 = 0.05;
/// A function is line-valid when its tail maximum is below this multiple of its maximum.
pub const LINE_VALID_RATIO: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid needs a power-of-two point count >= 256, got {0}")]
    BadPointCount(usize),
    #[error("grid half-width must be positive and finite")]
    BadHalfWidth,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid function contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("function has not decayed at the domain edge (tail ratio {0:e}) and is not flagged periodic")]
    NotLineValid(f64),
    #[error("grids differ")]
    GridMismatch,
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Plans<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Uniform periodic grid on [−L, L) with M nodes.
#[derive(Clone)]
pub struct SpatialGrid<T: Real> {
    half_width: T,
    points: usize,
    plans: Arc<Plans<T>>,
}

impl<T: Real> fmt::Debug for SpatialGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid").field("half_width", &self.half_width).field("points", &self.points).finish()
    }
}

impl<T: Real> PartialEq for SpatialGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.half_width == other.half_width
    }
}

impl<T: Real> SpatialGrid<T> {
    pub fn new(half_width: T, points: usize) -> Result<Self, FieldError> {
        if points < 256 || !points.is_power_of_two() {
            return Err(FieldError::BadPointCount(points));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(FieldError::BadHalfWidth);
        }
        let mut planner = FftPlanner::new();
        let plans = Plans { forward: planner.plan_fft_forward(points), inverse: planner.plan_fft_inverse(points) };
        Ok(Self { half_width, points, plans: Arc::new(plans) })
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> T {
        T::lit(2.0) * self.half_width / T::of_usize(self.points)
    }

    pub fn node(&self, j: usize) -> T {
        -self.half_width + T::of_usize(j) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    /// Angular wavenumber of FFT bin `j`; the Nyquist bin is reported as negative.
    pub fn wavenumber(&self, j: usize) -> T {
        let m = self.points;
        let signed = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
        T::lit(signed) * T::PI() / self.half_width
    }

    pub fn wavenumbers(&self) -> Vec<T> {
        (0..self.points).map(|j| self.wavenumber(j)).collect()
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.points / 2
    }

    pub fn fft_forward(&self, data: &mut [Complex<T>]) {
        self.plans.forward.process(data);
    }

    /// Inverse transform including the 1/M normalization.
    pub fn fft_inverse(&self, data: &mut [Complex<T>]) {
        self.plans.inverse.process(data);
        let scale = T::one() / T::of_usize(self.points);
        for z in data.iter_mut() {
            *z = *z * scale;
        }
    }

    fn tail_width(&self) -> usize {
        ((self.points as f64 * TAIL_FRACTION / 2.0).round() as usize).max(1)
    }
}

/// Real function sampled on a [`SpatialGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T: Real> {
    grid: SpatialGrid<T>,
    values: Vec<T>,
    periodic: bool,
}

impl<T: Real> GridFunction<T> {
    pub fn new(grid: SpatialGrid<T>, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != grid.points() {
            return Err(FieldError::LengthMismatch { expected: grid.points(), got: values.len() });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(j));
        }
        Ok(Self { grid, values, periodic: false })
    }

    /// Like [`GridFunction::new`] but marks the data as genuinely periodic, which
    /// lifts the decay precondition of the spectral routines.
    pub fn periodic(grid: SpatialGrid<T>, values: Vec<T>) -> Result<Self, FieldError> {
        Ok(Self::new(grid, values)?.into_periodic())
    }

    pub fn from_fn(grid: &SpatialGrid<T>, f: impl Fn(T) -> T) -> Result<Self, FieldError> {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &SpatialGrid<T>) -> Self {
        Self { grid: grid.clone(), values: vec![T::zero(); grid.points()], periodic: false }
    }

    pub fn into_periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Maximum of |f| over the outer 5% of nodes divided by the global maximum.
    pub fn tail_ratio(&self) -> T {
        let max = self.max_abs();
        if max == T::zero() {
            return T::zero();
        }
        let w = self.grid.tail_width();
        let m = self.values.len();
        let tail = self.values[..w].iter().chain(&self.values[m - w..]).fold(T::zero(), |acc, v| acc.max(v.abs()));
        tail / max
    }

    pub fn is_line_valid(&self) -> bool {
        self.tail_ratio() <= T::lit(LINE_VALID_RATIO)
    }

    /// Errors unless the function is line-valid or flagged periodic.
    pub fn require_spectral(&self) -> Result<(), FieldError> {
        if self.periodic || self.is_line_valid() {
            Ok(())
        } else {
            Err(FieldError::NotLineValid(self.tail_ratio().as_f64()))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect(), periodic: self.periodic }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            periodic: self.periodic || other.periodic,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// Discrete Fourier coefficients Σ_j f_j e^{−2πi jk/M} (unnormalized).
    pub fn spectrum(&self) -> Vec<Complex<T>> {
        let mut data: Vec<Complex<T>> = self.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.grid.fft_forward(&mut data);
        data
    }

    /// Real part of the inverse transform of `spectrum`.
    pub fn from_spectrum(grid: &SpatialGrid<T>, mut spectrum: Vec<Complex<T>>) -> Self {
        grid.fft_inverse(&mut spectrum);
        Self { grid: grid.clone(), values: spectrum.into_iter().map(|z| z.re).collect(), periodic: true }
    }

    /// Band-limited interpolant evaluated at every node shifted by `delta`.
    pub fn shifted_samples(&self, delta: T) -> Vec<T> {
        let spec = self.spectrum();
        let g = &self.grid;
        let shifted = spec
            .into_iter()
            .enumerate()
            .map(|(j, z)| {
                if g.is_nyquist(j) {
                    // real interpolant of the Nyquist mode
                    z * (g.wavenumber(j) * delta).cos()
                } else {
                    z * Complex::from_polar(T::one(), g.wavenumber(j) * delta)
                }
            })
            .collect();
        Self::from_spectrum(g, shifted).values
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), FieldError> {
        writeln!(out, "x,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.grid.node(j).as_f64(), v.as_f64())?;
        }
        Ok(())
    }

    /// Reads the "x,value" CSV layout; the grid is inferred from the abscissae.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, FieldError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| FieldError::Csv("empty input".into()))??;
        if header.trim() != "x,value" {
            return Err(FieldError::Csv(format!("unexpected header {header:?}")));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64, FieldError> {
                s.ok_or_else(|| FieldError::Csv(format!("row {row}: missing column")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| FieldError::Csv(format!("row {row}: {e}")))
            };
            xs.push(parse(parts.next())?);
            vs.push(T::lit(parse(parts.next())?));
        }
        let m = xs.len();
        let half_width = -xs.first().copied().unwrap_or(0.0);
        let grid = SpatialGrid::new(T::lit(half_width), m)?;
        let h = grid.spacing().as_f64();
        for (j, &x) in xs.iter().enumerate() {
            if (x - grid.node(j).as_f64()).abs() > 1e-9 * half_width.max(1.0) {
                return Err(FieldError::Csv(format!("row {j}: abscissa {x} is off the uniform grid (h={h})")));
            }
        }
        Self::new(grid, vs)
    }
}

/// Fourier multiplier (ik)^order applied to `spec`, with the Nyquist bin dropped for odd orders.
pub(crate) fn apply_derivative<T: Real>(grid: &SpatialGrid<T>, spec: &[Complex<T>], order: usize) -> Vec<Complex<T>> {
    if order == 0 {
        return spec.to_vec();
    }
    spec.iter()
        .enumerate()
        .map(|(j, &z)| {
            if order % 2 == 1 && grid.is_nyquist(j) {
                return Complex::new(T::zero(), T::zero());
            }
            let k = grid.wavenumber(j);
            let mag = k.powi(order as i32);
            let factor = match order % 4 {
                0 => Complex::new(mag, T::zero()),
                1 => Complex::new(T::zero(), mag),
                2 => Complex::new(-mag, T::zero()),
                _ => Complex::new(T::zero(), -mag),
            };
            z * factor
        })
        .collect()
}

/// Derivative of the given order by the Fourier multiplier (ik)^order.
pub fn spectral_derivative<T: Real>(f: &GridFunction<T>, order: usize) -> Result<GridFunction<T>, FieldError> {
    f.require_spectral()?;
    if order == 0 {
        return Ok(f.clone());
    }
    let spec = apply_derivative(f.grid(), &f.spectrum(), order);
    Ok(GridFunction::from_spectrum(f.grid(), spec))
}

/// All derivatives 0..=max_order from one forward transform.
pub fn derivative_table<T: Real>(f: &GridFunction<T>, max_order: usize) -> Result<Vec<Vec<T>>, FieldError> {
    f.require_spectral()?;
    let spec = f.spectrum();
    let mut table = Vec::with_capacity(max_order + 1);
    table.push(f.values().to_vec());
    for order in 1..=max_order {
        let d = apply_derivative(f.grid(), &spec, order);
        table.push(GridFunction::from_spectrum(f.grid(), d).into_values());
    }
    Ok(table)
}

/// Rectangle rule h·Σf_j, spectrally accurate for smooth periodic or decaying data.
pub fn integrate<T: Real>(f: &GridFunction<T>) -> T {
    integrate_values(f.grid(), f.values())
}

pub(crate) fn integrate_values<T: Real>(grid: &SpatialGrid<T>, values: &[T]) -> T {
    grid.spacing() * values.iter().copied().sum::<T>()
}

/// H^n norm with weight (1+k²)^n; n = 0 reproduces the discrete L² norm.
pub fn sobolev_norm<T: Real>(f: &GridFunction<T>, n: u32) -> T {
    let grid = f.grid();
    let spec = f.spectrum();
    let total: T = spec
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let k = grid.wavenumber(j);
            (T::one() + k * k).powi(n as i32) * z.norm_sqr()
        })
        .sum();
    (grid.spacing() / T::of_usize(grid.points()) * total).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid<f64> {
        SpatialGrid::new(40.0, 2048).unwrap()
    }

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpatialGrid::<f64>::new(40.0, 1000).is_err());
        assert!(SpatialGrid::<f64>::new(40.0, 128).is_err());
        assert!(SpatialGrid::<f64>::new(-1.0, 256).is_err());
    }

    #[test]
    fn single_mode_derivative() {
        let g = grid();
        let l = g.half_width();
        let f = GridFunction::periodic(g.clone(), g.nodes().iter().map(|&x| (std::f64::consts::PI * x / l).sin()).collect()).unwrap();
        let d = spectral_derivative(&f, 1).unwrap();
        let err = g
            .nodes()
            .iter()
            .zip(d.values())
            .map(|(&x, &v)| (v - std::f64::consts::PI / l * (std::f64::consts::PI * x / l).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = grid();
        let f = GridFunction::periodic(g.clone(), vec![3.5; g.points()]).unwrap();
        assert!(spectral_derivative(&f, 1).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn sech_squared_second_derivative() {
        let g = grid();
        let f = GridFunction::from_fn(&g, |x| -2.0 * sech(x).powi(2)).unwrap();
        let d2 = spectral_derivative(&f, 2).unwrap();
        // (sech²)'' = 4sech²tanh² − 2sech⁴
        let err = g
            .nodes()
            .iter()
            .zip(d2.values())
            .map(|(&x, &v)| {
                let s = sech(x);
                let t = x.tanh();
                (v + 2.0 * (4.0 * s * s * t * t - 2.0 * s.powi(4))).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn undecayed_nonperiodic_rejected() {
        let g = grid();
        let f = GridFunction::from_fn(&g, |x| x.cos()).unwrap();
        assert!(matches!(spectral_derivative(&f, 1), Err(FieldError::NotLineValid(_))));
    }

    #[test]
    fn quadrature_oracles() {
        let g = grid();
        assert_eq!(integrate(&GridFunction::zeros(&g)), 0.0);
        let f = GridFunction::from_fn(&g, |x| 4.0 * sech(x).powi(4)).unwrap();
        assert!((integrate(&f) - 16.0 / 3.0).abs() < 1e-10);
        let f = GridFunction::from_fn(&g, |x| (-x * x).exp()).unwrap();
        assert!((integrate(&f) - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn l2_norm_of_soliton() {
        let g = grid();
        let f = GridFunction::from_fn(&g, |x| -2.0 * sech(x).powi(2)).unwrap();
        assert!((sobolev_norm(&f, 0) - (16.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert_eq!(sobolev_norm(&GridFunction::zeros(&g), 3), 0.0);
    }

    #[test]
    fn nyquist_dropped_for_odd_orders() {
        let g = SpatialGrid::<f64>::new(10.0, 256).unwrap();
        let f = GridFunction::periodic(g.clone(), (0..256).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect()).unwrap();
        assert!(spectral_derivative(&f, 1).unwrap().max_abs() < 1e-12);
        assert!(spectral_derivative(&f, 2).unwrap().max_abs() > 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = SpatialGrid::<f64>::new(12.5, 256).unwrap();
        let f = GridFunction::from_fn(&g, |x| (-x * x).exp() * 1.0e-3 / 7.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,value\n"));
        let back = GridFunction::<f64>::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn single_precision_grid() {
        let g = SpatialGrid::<f32>::new(40.0, 1024).unwrap();
        let f = GridFunction::from_fn(&g, |x| (-x * x).exp()).unwrap();
        assert!((integrate(&f) - std::f32::consts::PI.sqrt()).abs() < 1e-5);
    }
}
