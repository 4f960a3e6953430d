use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdvlab::acceptance::DEFAULT_SEED;
use kdvlab::scatter::{DEFAULT_K_MAX, DEFAULT_K_POINTS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "kdv", version, about = "KdV multisoliton, scattering and minimization experiments")]
pub struct Cli {
    /// Half-width L of the periodic grid [−L, L)
    #[arg(long = "grid-L", global = true)]
    pub grid_l: Option<f64>,
    /// Number of grid points M (a power of two)
    #[arg(long = "grid-M", global = true)]
    pub grid_m: Option<usize>,
    #[arg(long, global = true)]
    pub kmax: Option<f64>,
    #[arg(long, global = true)]
    pub kpoints: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Evolution horizon
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags given on the command line take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Multisoliton profile CSV
    Soliton(SolitonArgs),
    /// E_1..E_n of a profile
    Energy(EnergyArgs),
    /// a(k), bound states and trace residuals
    Scatter(ScatterArgs),
    /// Minimizer of E_{n+1} subject to E_1..E_n = e
    Solve(SolveArgs),
    /// Region classification over an (e1, e2) lattice
    PhaseDiagram(PhaseArgs),
    /// Pseudospectral evolution with snapshots and conservation drift
    Evolve(EvolveArgs),
    /// Distance to the multisoliton manifold along a perturbed evolution
    Stability(StabilityArgs),
    /// Diagnostics of a gas or point-mass minimizing sequence
    Minseq(MinseqArgs),
    /// Acceptance suite with one pass/fail line per criterion
    Verify(VerifyArgs),
}

/// Where a command's profile comes from: a multisoliton or a sampled CSV.
#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
#[serde(default)]
pub struct Source {
    /// Multisoliton JSON {"betas": [..], "shifts": [..]}
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Comma-separated, decreasing
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub betas: Vec<f64>,
    /// Comma-separated shifts c_j; zero when omitted
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub shifts: Vec<f64>,
    /// Profile CSV with header "x,value"
    #[arg(long, conflicts_with_all = ["input", "betas"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
}

impl Source {
    fn resolve(&mut self) -> Result<(), CliError> {
        if let Some(path) = self.input.take() {
            if !self.betas.is_empty() {
                return Err(CliError::validation("give either --input or --betas, not both"));
            }
            let cfg = kdvlab::Config::from_json(&read(&path)?)?;
            self.betas = cfg.betas().to_vec();
            self.shifts = cfg.shifts().to_vec();
        }
        if self.shifts.is_empty() {
            self.shifts = vec![0.0; self.betas.len()];
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_none() && self.betas.is_empty() && self.profile.is_none()
    }
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct SolitonArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: Source,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct EnergyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: Source,
    /// Highest energy index
    #[arg(long, default_value_t = 3)]
    pub n: usize,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct ScatterArgs {
    /// Profile source; the zero profile when empty
    #[command(flatten)]
    #[serde(flatten)]
    pub source: Source,
    /// Highest trace identity checked
    #[arg(long, default_value_t = 3)]
    pub n: usize,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
#[serde(default)]
pub struct SolveArgs {
    /// Constraint values e_1..e_n
    #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub e: Vec<f64>,
    /// Number of constraints; must match the length of e
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Multisoliton degree for the relaxed problem; the minimal gas degree when omitted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct PhaseArgs {
    #[arg(long, default_value = "0..10", allow_hyphen_values = true)]
    pub e1: String,
    #[arg(long, default_value = "-30..5", allow_hyphen_values = true)]
    pub e2: String,
    #[arg(long, default_value_t = 128)]
    pub res: usize,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct EvolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: Source,
    /// Snapshots after the initial one
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Speed of the co-moving frame
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub frame_speed: f64,
    /// Highest conserved quantity in the drift table
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Rescale every step so that the L² norm is held fixed
    #[arg(long)]
    pub l2_projection: bool,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct StabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: Source,
    /// Size of the H^n perturbation
    #[arg(long, default_value_t = 1e-2)]
    pub delta: f64,
    /// Sobolev order of the distance
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    /// Speed of the co-moving frame; the mean soliton speed when omitted
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_speed: Option<f64>,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    Gas,
    PointMass,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct MinseqArgs {
    #[arg(long, value_enum, default_value = "point-mass")]
    pub kind: SequenceKind,
    /// Gas constraints e_1..e_n
    #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub e: Vec<f64>,
    /// Gas multisoliton degree; the minimal gas degree when omitted
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// Gas cluster separation of the first element; it doubles along the sequence
    #[arg(long, default_value_t = 20.0)]
    pub separation: f64,
    /// Number of gas elements
    #[arg(long, default_value_t = 3)]
    pub count: usize,
    /// Point-mass amplitude c
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Point-mass frequency k
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Point-mass sequence indices
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [16, 64, 256])]
    pub indices: Vec<usize>,
}

#[derive(Parser, Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(default)]
pub struct VerifyArgs {
    /// Criteria to run; all when empty
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<usize>,
}

macro_rules! default_from_clap {
    ($($ty:ty),*) => {$(
        impl Default for $ty {
            fn default() -> Self {
                <$ty>::parse_from(["kdv"])
            }
        }
    )*};
}

default_from_clap!(SolitonArgs, EnergyArgs, ScatterArgs, PhaseArgs, EvolveArgs, StabilityArgs, MinseqArgs, VerifyArgs);


/// Fully resolved settings of one invocation; written to the output directory as the run manifest.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "L", default = "default_half_width")]
    pub half_width: f64,
    #[serde(rename = "M", default = "default_points")]
    pub points: usize,
    #[serde(default = "default_kmax")]
    pub kmax: f64,
    #[serde(default = "default_kpoints")]
    pub kpoints: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub command: Command,
}

fn default_half_width() -> f64 {
    40.0
}

fn default_points() -> usize {
    2048
}

fn default_kmax() -> f64 {
    DEFAULT_K_MAX
}

fn default_kpoints() -> usize {
    DEFAULT_K_POINTS
}

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    10.0
}

fn default_out() -> PathBuf {
    PathBuf::from("kdv-out")
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Defaults, then the config file, then command-line flags.
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let mut file: Option<serde_json::Value> = None;
        if let Some(path) = &cli.config {
            file = Some(serde_json::from_str(&read(path)?)?);
        }
        let mut value = file.unwrap_or_else(|| serde_json::json!({}));
        let map = value.as_object_mut().ok_or_else(|| CliError::validation("config file must hold a JSON object"))?;
        if let Some(cmd) = cli.command {
            map.insert("command".into(), serde_json::to_value(cmd)?);
        }
        if !map.contains_key("command") {
            return Err(CliError::validation("no subcommand given and the config file names none"));
        }
        let mut cfg: RunConfig = serde_json::from_value(value)?;
        if let Some(v) = cli.grid_l {
            cfg.half_width = v;
        }
        if let Some(v) = cli.grid_m {
            cfg.points = v;
        }
        if let Some(v) = cli.kmax {
            cfg.kmax = v;
        }
        if let Some(v) = cli.kpoints {
            cfg.kpoints = v;
        }
        if let Some(v) = cli.dt {
            cfg.dt = v;
        }
        if let Some(v) = cli.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = cli.out {
            cfg.out = v;
        }
        if let Some(v) = cli.seed {
            cfg.seed = v;
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Inlines referenced multisoliton files and checks per-command requirements.
    fn resolve(&mut self) -> Result<(), CliError> {
        match &mut self.command {
            Command::Soliton(a) => {
                a.source.resolve()?;
                if a.source.betas.is_empty() {
                    return Err(CliError::validation("soliton needs --input or --betas"));
                }
                if a.source.profile.is_some() {
                    return Err(CliError::validation("soliton does not read a profile"));
                }
            }
            Command::Energy(a) => {
                if a.source.is_empty() {
                    return Err(CliError::validation("energy needs --profile, --input or --betas"));
                }
                a.source.resolve()?;
            }
            Command::Scatter(a) => a.source.resolve()?,
            Command::Evolve(a) => {
                if a.source.is_empty() {
                    return Err(CliError::validation("evolve needs --profile, --input or --betas"));
                }
                a.source.resolve()?;
            }
            Command::Stability(a) => {
                a.source.resolve()?;
                if a.source.betas.is_empty() || a.source.profile.is_some() {
                    return Err(CliError::validation("stability needs a multisoliton via --input or --betas"));
                }
                if a.frame_speed.is_none() {
                    let speeds: Vec<f64> = a.source.betas.iter().map(|b| 4.0 * b * b).collect();
                    a.frame_speed = Some(speeds.iter().sum::<f64>() / speeds.len() as f64);
                }
            }
            Command::Solve(a) => {
                if a.e.is_empty() {
                    return Err(CliError::validation("solve needs --e"));
                }
                match a.n {
                    Some(n) if n != a.e.len() => {
                        return Err(CliError::validation(format!("--n {n} but {} constraint values", a.e.len())));
                    }
                    _ => a.n = Some(a.e.len()),
                }
            }
            Command::Minseq(a) => {
                if a.kind == SequenceKind::Gas && a.e.is_empty() {
                    return Err(CliError::validation("gas sequence needs --e"));
                }
            }
            Command::PhaseDiagram(_) | Command::Verify(_) => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses "a..b" into (a, b) with a < b.
pub fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::validation(format!("range {text:?} must look like a..b with a < b"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if a >= b || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok((a, b))
}
