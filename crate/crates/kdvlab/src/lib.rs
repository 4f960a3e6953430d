#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod constraint;
pub mod energy;
pub mod evolve;
pub mod field;
mod linalg;
pub mod scalar;
pub mod scatter;
pub mod sequences;
pub mod soliton;

pub use field::{integrate, sobolev_norm, spectral_derivative, FieldError, GridFunction, SpatialGrid};
pub use scalar::Real;
pub use soliton::{eval_multisoliton, evolve_config, superpose, SolitonConfig, SolitonError};

pub type Grid = SpatialGrid<f64>;
pub type Profile = GridFunction<f64>;
pub type Config = SolitonConfig<f64>;

pub use energy::{
    energy_density, euler_lagrange_residual, eval_energy, reduce_canonical, sigma_density, variational_derivative, DensityPolynomial,
    EnergyError, EulerLagrangeReport, Rational,
};

pub type Density = DensityPolynomial<Rational>;
pub use constraint::{
    classify, constraints_of_betas, grad_c, point_mass_infimum, relaxed_minimize, solve_betas, wiggle_direction, ConstraintError,
    MinimizerReport, RegionLabel, WeightedBeta,
};

pub type Report = MinimizerReport<f64>;
pub use scatter::{
    add_bound_states, blaschke, bound_states, jost_wronskian, log_a_moments, trace_residuals, transmission_reciprocal, FrequencyGrid,
    ScatterError, ScatteringSample,
};

pub type KGrid = FrequencyGrid<f64>;
pub type Sample = ScatteringSample<f64>;
pub use evolve::{
    conservation_drift, evolve_kdv, manifold_distance, orbital_stability_experiment, EvolutionSettings, EvolveError, StabilityTrace,
};

pub type Settings = EvolutionSettings<f64>;
pub use sequences::{
    gas_sequence, molecular_residual, phase_diagram_sample, point_mass_diagnostics, wigner_von_neumann, PhaseDiagram, SequenceDiagnostics,
    SequenceError,
};
