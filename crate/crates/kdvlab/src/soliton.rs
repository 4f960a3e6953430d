//! Exact multisoliton profiles from the log-determinant formula.
//!
//! With v_j = e^{−β_j(x−c_j)} and the Cauchy matrix C_jk = 1/(β_j+β_k), the
//! profile is −2 (log det(I + D C D))'' with D = diag(v). Writing
//! B = D⁻² + C this becomes −2[2·1ᵀB⁻¹β − (1ᵀB⁻¹1)²], which has no cancellation
//! to the right of the solitons. Left of them the configuration is mirrored.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::field::{FieldError, GridFunction, SpatialGrid};
use crate::scalar::Real;

/// Largest exponent fed to `exp` while assembling B.
const EXP_CLAMP: f64 = 600.0;

#[derive(Debug, Error)]
pub enum SolitonError {
    #[error("betas and shifts differ in length ({betas} vs {shifts})")]
    LengthMismatch { betas: usize, shifts: usize },
    #[error("beta[{0}] is not strictly positive")]
    NonPositive(usize),
    #[error("betas are not strictly decreasing at index {0}")]
    NotDecreasing(usize),
    #[error("non-finite parameter at index {0}")]
    NonFinite(usize),
    #[error("factorization failed at x = {0} (betas too close)")]
    Conditioning(f64),
    #[error("{configs} configurations but {offsets} offsets")]
    OffsetMismatch { configs: usize, offsets: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("malformed configuration: {0}")]
    Json(#[from] serde_json::Error),
}

/// Amplitude parameters β₁ > … > β_N > 0 and shifts c of a multisoliton.
#[derive(Clone, Debug, PartialEq)]
pub struct SolitonConfig<T: Real> {
    betas: Vec<T>,
    shifts: Vec<T>,
}

impl<T: Real> SolitonConfig<T> {
    pub fn new(betas: Vec<T>, shifts: Vec<T>) -> Result<Self, SolitonError> {
        if betas.len() != shifts.len() {
            return Err(SolitonError::LengthMismatch { betas: betas.len(), shifts: shifts.len() });
        }
        for (i, (&b, &c)) in betas.iter().zip(&shifts).enumerate() {
            if !b.is_finite() || !c.is_finite() {
                return Err(SolitonError::NonFinite(i));
            }
            if b <= T::zero() {
                return Err(SolitonError::NonPositive(i));
            }
            if i > 0 && b >= betas[i - 1] {
                return Err(SolitonError::NotDecreasing(i));
            }
        }
        Ok(Self { betas, shifts })
    }

    /// The degree-zero soliton, i.e. the zero function.
    pub fn empty() -> Self {
        Self { betas: Vec::new(), shifts: Vec::new() }
    }

    pub fn single(beta: T, shift: T) -> Result<Self, SolitonError> {
        Self::new(vec![beta], vec![shift])
    }

    pub fn degree(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    pub fn shifts(&self) -> &[T] {
        &self.shifts
    }

    pub fn translated(&self, s: T) -> Self {
        Self { betas: self.betas.clone(), shifts: self.shifts.iter().map(|&c| c + s).collect() }
    }

    pub fn with_shifts(&self, shifts: Vec<T>) -> Result<Self, SolitonError> {
        Self::new(self.betas.clone(), shifts)
    }

    /// Trough position of a lone soliton with parameters (β, c).
    pub fn single_center(beta: T, shift: T) -> T {
        shift - (T::lit(2.0) * beta).ln() / (T::lit(2.0) * beta)
    }

    /// Shift that places a lone soliton's trough at `center`.
    pub fn shift_for_center(beta: T, center: T) -> T {
        center + (T::lit(2.0) * beta).ln() / (T::lit(2.0) * beta)
    }

    /// Configuration whose profile is x ↦ Q_{β,c}(−x).
    pub fn mirrored(&self) -> Self {
        let b = &self.betas;
        let shifts = (0..b.len())
            .map(|j| {
                let mut log_a = T::zero();
                for m in 0..b.len() {
                    log_a = log_a + (b[j] + b[m]).ln();
                    if m != j {
                        log_a = log_a - (b[j] - b[m]).abs().ln();
                    }
                }
                -self.shifts[j] + log_a / b[j]
            })
            .collect();
        Self { betas: self.betas.clone(), shifts }
    }

    pub fn from_json(text: &str) -> Result<Self, SolitonError> {
        let raw: RawConfig = serde_json::from_str(text)?;
        raw.into_config()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&RawConfig::from_config(self)).expect("plain arrays serialize")
    }
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    betas: Vec<f64>,
    shifts: Vec<f64>,
}

impl RawConfig {
    fn from_config<T: Real>(cfg: &SolitonConfig<T>) -> Self {
        Self { betas: cfg.betas.iter().map(|b| b.as_f64()).collect(), shifts: cfg.shifts.iter().map(|c| c.as_f64()).collect() }
    }

    fn into_config<T: Real>(self) -> Result<SolitonConfig<T>, SolitonError> {
        SolitonConfig::new(self.betas.into_iter().map(T::lit).collect(), self.shifts.into_iter().map(T::lit).collect())
    }
}

impl<T: Real> Serialize for SolitonConfig<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawConfig::from_config(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for SolitonConfig<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        RawConfig::deserialize(d)?.into_config().map_err(serde::de::Error::custom)
    }
}

/// Q_{β,c}(x) at a single point, or `None` if the factorization breaks down.
fn profile_right_form<T: Real>(betas: &[T], shifts: &[T], x: T) -> Option<T> {
    let n = betas.len();
    let two = T::lit(2.0);
    let clamp = T::lit(EXP_CLAMP);
    // B = D⁻² + C, row-major, factorized in place as B = L Lᵀ.
    let mut b = vec![T::zero(); n * n];
    for j in 0..n {
        for k in 0..n {
            b[j * n + k] = T::one() / (betas[j] + betas[k]);
        }
        b[j * n + j] = b[j * n + j] + (two * betas[j] * (x - shifts[j])).min(clamp).exp();
    }
    for j in 0..n {
        let mut d = b[j * n + j];
        for m in 0..j {
            d = d - b[j * n + m] * b[j * n + m];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        b[j * n + j] = d;
        for i in j + 1..n {
            let mut s = b[i * n + j];
            for m in 0..j {
                s = s - b[i * n + m] * b[j * n + m];
            }
            b[i * n + j] = s / d;
        }
    }
    let solve = |rhs: &mut [T]| {
        for i in 0..n {
            let mut s = rhs[i];
            for m in 0..i {
                s = s - b[i * n + m] * rhs[m];
            }
            rhs[i] = s / b[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for m in i + 1..n {
                s = s - b[m * n + i] * rhs[m];
            }
            rhs[i] = s / b[i * n + i];
        }
    };
    let mut y1 = vec![T::one(); n];
    let mut yb = betas.to_vec();
    solve(&mut y1);
    solve(&mut yb);
    let s1: T = y1.iter().copied().sum();
    let sb: T = yb.iter().copied().sum();
    Some(-two * (two * sb - s1 * s1))
}

/// Evaluates Q_{β,c} on the grid.
pub fn eval_multisoliton<T: Real>(cfg: &SolitonConfig<T>, grid: &SpatialGrid<T>) -> Result<GridFunction<T>, SolitonError> {
    if cfg.degree() == 0 {
        return Ok(GridFunction::zeros(grid));
    }
    let mirror = cfg.mirrored();
    let pivot = cfg.shifts.iter().copied().sum::<T>() / T::of_usize(cfg.degree());
    let values: Result<Vec<T>, SolitonError> = grid
        .nodes()
        .into_par_iter()
        .map(|x| {
            let v = if x >= pivot {
                profile_right_form(&cfg.betas, &cfg.shifts, x)
            } else {
                profile_right_form(&mirror.betas, &mirror.shifts, -x)
            };
            v.ok_or_else(|| SolitonError::Conditioning(x.as_f64()))
        })
        .collect();
    Ok(GridFunction::new(grid.clone(), values?)?)
}

/// Advances the shifts along the KdV flow: c_j ↦ c_j + 4β_j² t.
pub fn evolve_config<T: Real>(cfg: &SolitonConfig<T>, t: T) -> SolitonConfig<T> {
    SolitonConfig {
        betas: cfg.betas.clone(),
        shifts: cfg.betas.iter().zip(&cfg.shifts).map(|(&b, &c)| c + T::lit(4.0) * b * b * t).collect(),
    }
}

/// Σ_j Q_{β^j,c^j}(x − offset_j).
pub fn superpose<T: Real>(configs: &[SolitonConfig<T>], offsets: &[T], grid: &SpatialGrid<T>) -> Result<GridFunction<T>, SolitonError> {
    if configs.len() != offsets.len() {
        return Err(SolitonError::OffsetMismatch { configs: configs.len(), offsets: offsets.len() });
    }
    let mut total = GridFunction::zeros(grid);
    for (cfg, &s) in configs.iter().zip(offsets) {
        total = total.add(&eval_multisoliton(&cfg.translated(s), grid)?)?;
    }
    Ok(total)
}
