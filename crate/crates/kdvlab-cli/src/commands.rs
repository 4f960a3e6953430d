use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use kdvlab::acceptance::{run_criteria, CRITERIA};
use kdvlab::constraint::{classify, point_mass_infimum, relaxed_minimize, solve_betas, RegionLabel};
use kdvlab::energy::eval_energies;
use kdvlab::evolve::{check_seam, evolve_sampled, exact_in_frame, orbital_stability_experiment};
use kdvlab::scatter::{log_a_moments, scattering_sample, trace_rhs};
use kdvlab::sequences::{gas_sequence, wigner_von_neumann_grid, write_diagnostics_csv};
use kdvlab::{
    eval_multisoliton, phase_diagram_sample, point_mass_diagnostics, sobolev_norm, wigner_von_neumann, Config, Grid, KGrid, Profile,
    Report, Settings,
};
use serde_json::json;

use crate::config::{parse_range, Command, MinseqArgs, RunConfig, SequenceKind, Source, MANIFEST};
use crate::error::CliError;

/// Runs the resolved command, writing the manifest and all tables under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join(MANIFEST), cfg.to_json() + "\n")?;
    match &cfg.command {
        Command::Soliton(a) => {
            let u = profile(cfg, &a.source)?;
            u.write_csv(create(&cfg.out, "soliton.csv")?)?;
        }
        Command::Energy(a) => energy(cfg, &a.source, a.n)?,
        Command::Scatter(a) => scatter(cfg, &a.source, a.n)?,
        Command::Solve(a) => {
            let value = solve(&a.e, a.degree)?;
            emit_json(cfg, "solve.json", &value)?;
        }
        Command::PhaseDiagram(a) => {
            let diagram = phase_diagram_sample(parse_range(&a.e1)?, parse_range(&a.e2)?, a.res)?;
            diagram.write_csv(create(&cfg.out, "phase_diagram.csv")?)?;
            println!("{}", serde_json::to_string(&diagram.counts())?);
        }
        Command::Evolve(a) => {
            let settings = Settings::new(cfg.dt, cfg.horizon)?
                .with_frame_speed(a.frame_speed)
                .with_samples(a.samples)
                .with_l2_projection(a.l2_projection);
            evolve(cfg, &a.source, &settings, a.n)?;
        }
        Command::Stability(a) => {
            let grid = grid(cfg)?;
            let soliton = Config::new(a.source.betas.clone(), a.source.shifts.clone())?;
            let settings = Settings::new(cfg.dt, cfg.horizon)?.with_frame_speed(a.frame_speed.unwrap_or(0.0)).with_samples(a.samples);
            let trace = orbital_stability_experiment(&soliton, a.delta, &settings, a.n, &grid)?;
            trace.write_csv(create(&cfg.out, "stability.csv")?)?;
            println!("{}", json!({ "sup_distance": trace.sup_distance }));
        }
        Command::Minseq(a) => match a.kind {
            SequenceKind::Gas => gas(cfg, a)?,
            SequenceKind::PointMass => point_mass(cfg, a)?,
        },
        Command::Verify(a) => verify(cfg, &a.criteria)?,
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn emit_json(cfg: &RunConfig, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(cfg.out.join(name), text.clone() + "\n")?;
    println!("{text}");
    Ok(())
}

fn grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    Ok(Grid::new(cfg.half_width, cfg.points)?)
}

fn profile(cfg: &RunConfig, source: &Source) -> Result<Profile, CliError> {
    if let Some(path) = &source.profile {
        let file = File::open(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        return Ok(Profile::read_csv(BufReader::new(file))?);
    }
    let grid = grid(cfg)?;
    if source.betas.is_empty() {
        return Ok(Profile::zeros(&grid));
    }
    let soliton = Config::new(source.betas.clone(), source.shifts.clone())?;
    Ok(eval_multisoliton(&soliton, &grid)?)
}

fn energy(cfg: &RunConfig, source: &Source, n: usize) -> Result<(), CliError> {
    let u = profile(cfg, source)?;
    let energies = eval_energies(n, &u)?;
    let mut out = create(&cfg.out, "energy.csv")?;
    writeln!(out, "n,E")?;
    for (m, e) in energies.iter().enumerate() {
        writeln!(out, "{},{:.16e}", m + 1, e)?;
        println!("E{} = {:.16e}", m + 1, e);
    }
    Ok(())
}

fn scatter(cfg: &RunConfig, source: &Source, n: usize) -> Result<(), CliError> {
    let u = profile(cfg, source)?;
    let sample = scattering_sample(&u, &KGrid::new(cfg.kmax, cfg.kpoints)?)?;
    sample.write_csv(create(&cfg.out, "scattering.csv")?)?;
    fs::write(cfg.out.join("bound_states.json"), sample.bound_states_json() + "\n")?;
    let moments = log_a_moments(&sample, n);
    let energies = eval_energies(n, &u)?;
    let mut out = create(&cfg.out, "trace.csv")?;
    writeln!(out, "n,energy,trace,residual,relative")?;
    for (m, &e) in energies.iter().enumerate() {
        let rhs = trace_rhs(m + 1, moments.values[m], &sample.bound_betas);
        let residual = e - rhs;
        let relative = if e != 0.0 { (residual / e).abs() } else { residual.abs() };
        writeln!(out, "{},{:.16e},{:.16e},{:.16e},{:.16e}", m + 1, e, rhs, residual, relative)?;
    }
    println!("bound states: {}", sample.bound_states_json());
    Ok(())
}

/// Minimizer report for e, or the point-mass infimum when no multisoliton attains it.
pub fn solve(e: &[f64], degree: Option<usize>) -> Result<serde_json::Value, CliError> {
    let region = classify(e);
    let report: Report = match (region, degree) {
        (RegionLabel::Gas(minimal), Some(d)) if d < minimal => {
            return Err(CliError::validation(format!("degree {d} is below the minimal gas degree {minimal}")));
        }
        (RegionLabel::Gas(minimal), d) => relaxed_minimize(e, d.unwrap_or(minimal))?,
        (RegionLabel::InteriorMnn | RegionLabel::BoundaryMnn(_) | RegionLabel::Origin, Some(d)) => relaxed_minimize(e, d)?,
        (RegionLabel::InteriorMnn | RegionLabel::BoundaryMnn(_) | RegionLabel::Origin, None) => solve_betas(e)?,
        (RegionLabel::PointMass, _) => {
            let (c, gamma0, gamma1) = point_mass_infimum(e[0], e[1])?;
            return Ok(json!({ "betas": [], "C": c, "gamma": [gamma0, gamma1], "region": region.to_string() }));
        }
        (RegionLabel::Infeasible, _) => return Err(CliError::validation(format!("constraints {e:?} are infeasible"))),
        (RegionLabel::Unresolved, _) => {
            return Err(CliError::Numerical(format!("no solver route attains {e:?}")));
        }
    };
    Ok(report.to_json())
}

fn evolve(cfg: &RunConfig, source: &Source, settings: &Settings, n: usize) -> Result<(), CliError> {
    let soliton = if source.betas.is_empty() { None } else { Some(Config::new(source.betas.clone(), source.shifts.clone())?) };
    let u0 = profile(cfg, source)?;
    if let Some(s) = &soliton {
        check_seam(s, u0.grid(), settings)?;
    }
    let snapshots = evolve_sampled(&u0, settings)?;
    let dir = cfg.out.join("snapshots");
    fs::create_dir_all(&dir)?;
    let mut table = create(&cfg.out, "energies.csv")?;
    let header: Vec<String> = (1..=n).map(|m| format!("E{m}")).collect();
    let error_column = if soliton.is_some() { ",h1_error" } else { "" };
    writeln!(table, "t,{}{error_column}", header.join(","))?;
    let initial = eval_energies(n, &u0)?;
    let mut drift = vec![0.0f64; n];
    for (i, (t, u)) in snapshots.iter().enumerate() {
        u.write_csv(create(&dir, &format!("u_{i:04}.csv"))?)?;
        let energies = eval_energies(n, u)?;
        for (m, e) in energies.iter().enumerate() {
            drift[m] = drift[m].max((e - initial[m]).abs() / initial[m].abs().max(1.0));
        }
        let cells: Vec<String> = energies.iter().map(|e| format!("{e:.16e}")).collect();
        write!(table, "{t:.16e},{}", cells.join(","))?;
        if let Some(s) = &soliton {
            let exact = eval_multisoliton(&exact_in_frame(s, *t, settings.frame_speed), u.grid())?;
            write!(table, ",{:.16e}", sobolev_norm(&u.sub(&exact)?, 1))?;
        }
        writeln!(table)?;
    }
    let mut out = create(&cfg.out, "drift.csv")?;
    writeln!(out, "n,drift")?;
    for (m, d) in drift.iter().enumerate() {
        writeln!(out, "{},{:.16e}", m + 1, d)?;
        println!("drift E{} = {:.16e}", m + 1, d);
    }
    Ok(())
}

fn gas(cfg: &RunConfig, a: &MinseqArgs) -> Result<(), CliError> {
    let e = &a.e;
    let degree = match (classify(e), a.degree) {
        (_, Some(d)) => d,
        (RegionLabel::Gas(minimal), None) => minimal,
        (_, None) => e.len(),
    };
    let target = if degree == e.len() { solve_betas(e)? } else { relaxed_minimize(e, degree)? };
    let grid = grid(cfg)?;
    let sequence = gas_sequence(e, degree, a.separation, a.count, &grid)?;
    let n = e.len();
    let mut out = create(&cfg.out, "gas.csv")?;
    let names: Vec<String> = (1..=n + 1).map(|m| format!("E{m}")).collect();
    writeln!(out, "idx,separation,{},constraint_gap,energy_gap", names.join(","))?;
    for (i, u) in sequence.iter().enumerate() {
        let energies = eval_energies(n + 1, u)?;
        let constraint_gap = energies[..n].iter().zip(e).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let energy_gap = energies[n] - target.c_value;
        let cells: Vec<String> = energies.iter().map(|v| format!("{v:.16e}")).collect();
        let separation = a.separation * 2f64.powi(i as i32);
        writeln!(out, "{i},{separation:.16e},{},{constraint_gap:.16e},{energy_gap:.16e}", cells.join(","))?;
    }
    println!("{}", serde_json::to_string(&target.to_json())?);
    Ok(())
}

fn point_mass(cfg: &RunConfig, a: &MinseqArgs) -> Result<(), CliError> {
    let mut sequence = Vec::with_capacity(a.indices.len());
    for &n in &a.indices {
        let grid = wigner_von_neumann_grid(a.k, n)?;
        sequence.push((n, wigner_von_neumann(a.c, a.k, n, &grid)?));
    }
    let rows = point_mass_diagnostics(&sequence, cfg.kmax)?;
    write_diagnostics_csv(&rows, create(&cfg.out, "point_mass.csv")?)?;
    for row in &rows {
        println!("n = {}: E = {:?}, max beta = {:.3e}", row.index, row.energies, row.max_beta());
    }
    Ok(())
}

fn verify(cfg: &RunConfig, criteria: &[usize]) -> Result<(), CliError> {
    let ids: Vec<usize> = if criteria.is_empty() { (1..=CRITERIA).collect() } else { criteria.to_vec() };
    if let Some(bad) = ids.iter().find(|&&id| id == 0 || id > CRITERIA) {
        return Err(CliError::validation(format!("criterion {bad} is outside 1..={CRITERIA}")));
    }
    let reports = run_criteria(&ids, cfg.seed);
    let mut out = create(&cfg.out, "verify.txt")?;
    for report in &reports {
        println!("{report}");
        writeln!(out, "{report}")?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", reports.len() - failed);
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} acceptance criteria failed")));
    }
    Ok(())
}
