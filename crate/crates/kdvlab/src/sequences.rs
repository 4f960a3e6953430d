//! Minimizing sequences: receding multisoliton clusters in the gas regime, the
//! Wigner–von Neumann point-mass sequence, the molecular decomposition check and
//! the two-constraint phase diagram.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::constraint::{classify, relaxed_minimize, solve_betas, ConstraintError, MinimizerReport, RegionLabel};
use crate::energy::{eval_energies, EnergyError};
use crate::evolve::{manifold_distance_from, trough_seeds, EvolveError};
use crate::field::{FieldError, GridFunction, SpatialGrid};
use crate::scalar::Real;
use crate::scatter::{log_a_moments, scattering_sample, FrequencyGrid, ScatterError};
use crate::soliton::{eval_multisoliton, superpose, SolitonConfig, SolitonError};

/// Largest admissible Gaussian envelope value at the grid edge.
const ENVELOPE_EDGE: f64 = 1e-12;
/// Half-width of the refined frequency window, in envelope standard deviations.
const WINDOW_SIGMAS: f64 = 24.0;
const WINDOW_PANELS: usize = 96;
/// Frequency panels outside the refined window.
const COARSE_PANELS: usize = 48;
pub const MAX_PHASE_RESOLUTION: usize = 512;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("grid half-width {half_width} is too small for envelope width {width}")]
    GridTooNarrow { half_width: f64, width: f64 },
    #[error("grid spacing does not resolve the oscillation frequency {0}")]
    GridTooCoarse(f64),
    #[error("sequence parameters must be positive and finite")]
    BadParameter,
    #[error("constraints {0:?} are not in the gas regime: {1}")]
    NotGas(Vec<f64>, RegionLabel),
    #[error("requested degree {requested} is below the minimal gas degree {minimal}")]
    DegreeBelowMinimal { requested: usize, minimal: usize },
    #[error("multisoliton cluster {index} reaches the periodic seam at separation {separation}")]
    ClusterOffGrid { index: usize, separation: f64 },
    #[error("phase-diagram resolution {0} exceeds {MAX_PHASE_RESOLUTION}")]
    ResolutionTooLarge(usize),
    #[error("configs and offsets differ in length")]
    OffsetMismatch,
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// q_n(x) = √(c/n) e^{−x²/(2n²)} cos(2kx).
pub fn wigner_von_neumann<T: Real>(c: T, k: T, n: usize, grid: &SpatialGrid<T>) -> Result<GridFunction<T>, SequenceError> {
    if !(c > T::zero()) || !(k >= T::zero()) || !k.is_finite() || n == 0 {
        return Err(SequenceError::BadParameter);
    }
    let width = T::of_usize(n);
    let l = grid.half_width();
    if (-(l * l) / (T::lit(2.0) * width * width)).exp() >= T::lit(ENVELOPE_EDGE) {
        return Err(SequenceError::GridTooNarrow { half_width: l.as_f64(), width: width.as_f64() });
    }
    // the oscillation must sit inside the dealiased band
    if T::lit(2.0) * k >= T::lit(2.0 / 3.0) * T::PI() / grid.spacing() {
        return Err(SequenceError::GridTooCoarse(k.as_f64()));
    }
    let amp = (c / width).sqrt();
    let two = T::lit(2.0);
    GridFunction::from_fn(grid, |x| amp * (-(x * x) / (two * width * width)).exp() * (two * k * x).cos()).map_err(Into::into)
}

/// A power-of-two grid wide enough for q_n and fine enough for the oscillation 2k.
pub fn wigner_von_neumann_grid<T: Real>(k: T, n: usize) -> Result<SpatialGrid<T>, SequenceError> {
    let width = n.max(1) as f64;
    let needed = width * (2.0 * (1.0 / ENVELOPE_EDGE).ln()).sqrt() * 1.05;
    let half_width = needed.max(40.0).log2().ceil().exp2();
    // at least eight points per oscillation period π/k and a spacing no coarser than 1/4
    let spacing = (std::f64::consts::PI / (8.0 * k.as_f64().max(1e-3))).min(0.25);
    let points = ((2.0 * half_width / spacing).log2().ceil().exp2() as usize).max(256);
    Ok(SpatialGrid::new(T::lit(half_width), points)?)
}

/// Energies, bound states and log|a| concentration statistics of one sequence element.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceDiagnostics<T> {
    pub index: usize,
    /// E₁, E₂, E₃.
    pub energies: Vec<T>,
    pub bound_betas: Vec<T>,
    pub k_nodes: Vec<T>,
    pub log_abs_a: Vec<T>,
    /// ∫k² log|a| and ∫k⁴ log|a| over ℝ.
    pub gamma: [T; 2],
    /// Mean and standard deviation of k under the normalized measure k² log|a| dk on k > 0.
    pub center_k: T,
    pub spread_k: T,
}

impl<T: Real> SequenceDiagnostics<T> {
    pub fn max_beta(&self) -> T {
        self.bound_betas.iter().copied().fold(T::zero(), T::max)
    }

    /// Largest |log|a|| over the sampled frequencies.
    pub fn max_log_abs_a(&self) -> T {
        self.log_abs_a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Writes "idx,E1,E2,E3,max_beta,gamma0,gamma1,center_k,spread_k".
pub fn write_diagnostics_csv<T: Real, W: Write>(rows: &[SequenceDiagnostics<T>], mut out: W) -> Result<(), SequenceError> {
    writeln!(out, "idx,E1,E2,E3,max_beta,gamma0,gamma1,center_k,spread_k")?;
    for d in rows {
        write!(out, "{}", d.index)?;
        for v in d.energies.iter().chain([d.max_beta(), d.gamma[0], d.gamma[1], d.center_k, d.spread_k].iter()) {
            write!(out, ",{:.16e}", v.as_f64())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Frequency grid with a refined window around the dominant Fourier peak of u.
///
/// To first order b(k) is proportional to û(2k), so log|a| concentrates where the
/// spectrum of u peaks; the window spans the peak's spectral spread.
pub fn peak_adapted_grid<T: Real>(u: &GridFunction<T>, k_max: T) -> Result<FrequencyGrid<T>, SequenceError> {
    let k_max = k_max.as_f64();
    let grid = u.grid();
    let spectrum = u.spectrum();
    let half = grid.points() / 2;
    let power: Vec<(f64, f64)> = (1..half).map(|j| (0.5 * grid.wavenumber(j).as_f64(), spectrum[j].norm_sqr().as_f64())).collect();
    let (peak_at, peak) = power.iter().copied().fold((0.0, 0.0), |best, p| if p.1 > best.1 { p } else { best });
    let mut edges: Vec<f64> = (0..=COARSE_PANELS).map(|j| k_max * j as f64 / COARSE_PANELS as f64).collect();
    if peak > 0.0 && peak_at > 0.0 && peak_at < k_max {
        // spread of the half-maximum neighbourhood of the peak
        let near: Vec<&(f64, f64)> = power.iter().filter(|p| p.1 > 1e-6 * peak && (p.0 - peak_at).abs() < 0.5 * peak_at).collect();
        let mass: f64 = near.iter().map(|p| p.1).sum();
        let mean = near.iter().map(|p| p.0 * p.1).sum::<f64>() / mass;
        let var = near.iter().map(|p| (p.0 - mean).powi(2) * p.1).sum::<f64>() / mass;
        let sigma = var.sqrt().max(0.5 * grid.wavenumber(1).as_f64());
        let lo = (mean - WINDOW_SIGMAS * sigma).max(0.0);
        let hi = (mean + WINDOW_SIGMAS * sigma).min(k_max);
        edges.retain(|&e| e < lo || e > hi);
        edges.extend((0..=WINDOW_PANELS).map(|j| lo + (hi - lo) * j as f64 / WINDOW_PANELS as f64));
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * k_max);
    }
    Ok(FrequencyGrid::from_edges(&edges)?)
}

/// Diagnostics of one element on a caller-supplied frequency grid.
pub fn diagnose<T: Real>(index: usize, u: &GridFunction<T>, k_grid: &FrequencyGrid<T>) -> Result<SequenceDiagnostics<T>, SequenceError> {
    let energies = eval_energies(3, u)?;
    let sample = scattering_sample(u, k_grid)?;
    let moments = log_a_moments(&sample, 2);
    let (mut mass, mut first, mut second) = (T::zero(), T::zero(), T::zero());
    for ((&k, &w), &l) in sample.k_grid.iter().zip(&sample.weights).zip(&sample.log_abs_a) {
        let m = w * k * k * l;
        mass = mass + m;
        first = first + m * k;
        second = second + m * k * k;
    }
    let (center_k, spread_k) = if mass > T::zero() {
        let c = first / mass;
        (c, (second / mass - c * c).max(T::zero()).sqrt())
    } else {
        (T::zero(), T::zero())
    };
    Ok(SequenceDiagnostics {
        index,
        energies,
        bound_betas: sample.bound_betas,
        k_nodes: sample.k_grid,
        log_abs_a: sample.log_abs_a,
        gamma: [moments.values[0], moments.values[1]],
        center_k,
        spread_k,
    })
}

/// Diagnostics for indexed elements, each on a peak-adapted frequency grid up to k_max.
pub fn point_mass_diagnostics<T: Real>(seq: &[(usize, GridFunction<T>)], k_max: T) -> Result<Vec<SequenceDiagnostics<T>>, SequenceError> {
    seq.iter()
        .map(|(index, u)| {
            if !u.is_line_valid() {
                return Err(SequenceError::Field(FieldError::NotLineValid(u.tail_ratio().as_f64())));
            }
            diagnose(*index, u, &peak_adapted_grid(u, k_max)?)
        })
        .collect()
}

/// Splits a weighted β pattern into groups of distinct values: group j holds every
/// value whose multiplicity exceeds j.
pub fn canonical_groups<T: Real>(report: &MinimizerReport<T>) -> Vec<Vec<T>> {
    let depth = report.betas.iter().map(|b| b.mult).max().unwrap_or(0);
    (0..depth).map(|j| report.betas.iter().filter(|b| b.mult > j).map(|b| b.value).collect()).collect()
}

/// Gas-regime minimizing sequence: element i places the canonical β groups at
/// spacing separation·2^i, each group a multisoliton centred on its slot.
pub fn gas_sequence<T: Real>(
    e: &[T],
    degree: usize,
    separation: T,
    count: usize,
    grid: &SpatialGrid<T>,
) -> Result<Vec<GridFunction<T>>, SequenceError> {
    if !(separation > T::zero()) || !separation.is_finite() {
        return Err(SequenceError::BadParameter);
    }
    let report = match classify(e) {
        RegionLabel::Gas(minimal) if degree >= minimal => relaxed_minimize(e, degree)?,
        RegionLabel::Gas(minimal) => return Err(SequenceError::DegreeBelowMinimal { requested: degree, minimal }),
        RegionLabel::InteriorMnn | RegionLabel::BoundaryMnn(_) => solve_betas(e)?,
        other => return Err(SequenceError::NotGas(e.iter().map(|v| v.as_f64()).collect(), other)),
    };
    let groups = canonical_groups(&report);
    let configs: Vec<SolitonConfig<T>> = groups
        .iter()
        .map(|g| SolitonConfig::new(g.clone(), g.iter().map(|&b| SolitonConfig::shift_for_center(b, T::zero())).collect()))
        .collect::<Result<_, _>>()?;
    let j = groups.len();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let s = separation * T::lit(2f64.powi(i as i32));
        let offsets: Vec<T> = (0..j).map(|g| (T::of_usize(g) - T::of_usize(j - 1) * T::lit(0.5)) * s).collect();
        for (index, (cfg, &x)) in configs.iter().zip(&offsets).enumerate() {
            let min_beta = cfg.betas().iter().copied().fold(T::infinity(), T::min);
            if x.abs() > grid.half_width() - T::lit(10.0) / min_beta {
                return Err(SequenceError::ClusterOffGrid { index, separation: s.as_f64() });
            }
        }
        out.push(superpose(&configs, &offsets, grid)?);
    }
    Ok(out)
}

/// H^n distance from Σ_j Q_{β^j,c^j}(x − x^j) to the multisoliton with the
/// concatenated β, minimized over its shifts.
pub fn molecular_residual<T: Real>(configs: &[SolitonConfig<T>], offsets: &[T], n: u32, grid: &SpatialGrid<T>) -> Result<T, SequenceError> {
    if configs.len() != offsets.len() {
        return Err(SequenceError::OffsetMismatch);
    }
    let target = superpose(configs, offsets, grid)?;
    let mut pairs: Vec<(T, T)> =
        configs.iter().zip(offsets).flat_map(|(cfg, &x)| cfg.betas().iter().copied().zip(cfg.translated(x).shifts().to_vec())).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let betas: Vec<T> = pairs.iter().map(|p| p.0).collect();
    // the concatenated multisoliton differs from the superposition by pairwise phase shifts
    let mut seeds = vec![pairs.iter().map(|p| p.1).collect::<Vec<T>>()];
    seeds.extend(trough_seeds(&target, &betas));
    let (distance, _) = manifold_distance_from(&target, &betas, n, &seeds)?;
    Ok(distance)
}

/// Region labels of classify on a lattice of cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDiagram<T> {
    pub e1: Vec<T>,
    pub e2: Vec<T>,
    /// labels[i][j] belongs to (e1[i], e2[j]).
    pub labels: Vec<Vec<RegionLabel>>,
}

impl<T: Real> PhaseDiagram<T> {
    /// Writes "e1,e2,region,N_min"; N_min is empty for labels without a degree.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), SequenceError> {
        writeln!(out, "e1,e2,region,N_min")?;
        for (i, row) in self.labels.iter().enumerate() {
            for (j, label) in row.iter().enumerate() {
                let degree = label.degree().map(|d| d.to_string()).unwrap_or_default();
                writeln!(out, "{:.16e},{:.16e},{},{}", self.e1[i].as_f64(), self.e2[j].as_f64(), label.tag(), degree)?;
            }
        }
        Ok(())
    }

    /// Number of lattice points per region tag.
    pub fn counts(&self) -> std::collections::BTreeMap<&'static str, usize> {
        let mut map = std::collections::BTreeMap::new();
        for label in self.labels.iter().flatten() {
            *map.entry(label.tag()).or_insert(0) += 1;
        }
        map
    }
}

fn cell_centres<T: Real>(range: (T, T), resolution: usize) -> Vec<T> {
    let width = (range.1 - range.0) / T::of_usize(resolution);
    (0..resolution).map(|i| range.0 + width * (T::of_usize(i) + T::lit(0.5))).collect()
}

/// Classifies (e₁, e₂) at the centres of a resolution × resolution lattice.
pub fn phase_diagram_sample<T: Real>(e1_range: (T, T), e2_range: (T, T), resolution: usize) -> Result<PhaseDiagram<T>, SequenceError> {
    if resolution == 0 || !(e1_range.1 > e1_range.0) || !(e2_range.1 > e2_range.0) {
        return Err(SequenceError::BadParameter);
    }
    if resolution > MAX_PHASE_RESOLUTION {
        return Err(SequenceError::ResolutionTooLarge(resolution));
    }
    let e1 = cell_centres(e1_range, resolution);
    let e2 = cell_centres(e2_range, resolution);
    let labels = e1.par_iter().map(|&a| e2.iter().map(|&b| classify(&[a, b])).collect()).collect();
    Ok(PhaseDiagram { e1, e2, labels })
}

/// Σ_j E_m(Q_{β^j,c^j}) for m = 1..up_to, each group evaluated on its own.
pub fn cluster_energy_sum<T: Real>(configs: &[SolitonConfig<T>], grid: &SpatialGrid<T>, up_to: usize) -> Result<Vec<T>, SequenceError> {
    let mut total = vec![T::zero(); up_to];
    for cfg in configs {
        for (t, e) in total.iter_mut().zip(eval_energies(up_to, &eval_multisoliton(cfg, grid)?)?) {
            *t = *t + e;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::WeightedBeta;

    #[test]
    fn groups_split_repeats() {
        let report = MinimizerReport {
            betas: vec![WeightedBeta { value: 2.0, mult: 1 }, WeightedBeta { value: 1.0, mult: 3 }],
            c_value: 0.0,
            multipliers: vec![],
            region: RegionLabel::Gas(4),
            one_sided: false,
        };
        assert_eq!(canonical_groups(&report), vec![vec![2.0, 1.0], vec![1.0], vec![1.0]]);
    }

    #[test]
    fn wvn_grid_checks() {
        let narrow = SpatialGrid::new(40.0, 1024).unwrap();
        assert!(matches!(wigner_von_neumann(1.0, 1.0, 16, &narrow), Err(SequenceError::GridTooNarrow { .. })));
        let g: SpatialGrid<f64> = wigner_von_neumann_grid(1.0, 16).unwrap();
        assert!(wigner_von_neumann(1.0, 1.0, 16, &g).is_ok());
        assert!(wigner_von_neumann(0.0, 1.0, 16, &g).is_err());
        let coarse = SpatialGrid::new(g.half_width(), 256).unwrap();
        assert!(matches!(wigner_von_neumann(1.0, 20.0, 16, &coarse), Err(SequenceError::GridTooCoarse(_))));
    }

    #[test]
    fn lattice_uses_cell_centres() {
        let d = phase_diagram_sample((0.0, 10.0), (-30.0, 5.0), 4).unwrap();
        assert_eq!(d.e1, vec![1.25, 3.75, 6.25, 8.75]);
        assert!(phase_diagram_sample((0.0, 1.0), (0.0, 1.0), 513).is_err());
        let mut csv = Vec::new();
        d.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 17);
    }
}
