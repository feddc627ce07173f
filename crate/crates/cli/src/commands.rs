use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use hdch::convergence::{run_convergence, ConvergenceConfig, ConvergenceReport};
use hdch::dynamics::{integrate_with, rhs_velocity, Formulation, InitialData};
use hdch::experiment::{emit_report, run_experiment, ExperimentConfig, VERSION};
use hdch::littlewood_paley::BlockNorm;
use hdch::sequences::{self, build_profile, SequenceParams, VerifyRow};
use hdch::{chdf, BesovParams, DyadicPartition, Error, Field, Result, ScalarField, VectorField};

use crate::config::{load, BesovConfig, SimulateConfig};
use crate::{Common, FormulationArg};

fn print_config<T: Serialize>(config: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(config)?);
    Ok(())
}

fn write_vector(path: &Path, u: &VectorField) -> Result<()> {
    let comps: Vec<&ScalarField> = u.components().iter().collect();
    chdf::write_file(path, u.grid(), &comps)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn simulate(common: &Common, formulation: Option<FormulationArg>) -> Result<()> {
    let mut config: SimulateConfig = load(common)?;
    let forms = match formulation {
        None => vec![config.solver.formulation],
        Some(FormulationArg::Velocity) => vec![Formulation::Velocity],
        Some(FormulationArg::Momentum) => vec![Formulation::Momentum],
        Some(FormulationArg::Both) => vec![Formulation::Velocity, Formulation::Momentum],
    };
    config.solver.formulation = forms[0];
    if common.print_config {
        return print_config(&config);
    }
    config.grid.validate()?;
    config.solver.validate()?;
    fs::create_dir_all(&common.out)?;

    let u0 = match config.initial.build(&config.grid)? {
        InitialData::Velocity(u) => u,
        InitialData::Momentum(m) => m.helmholtz_inverse(),
    };
    write_vector(&common.out.join("rhs_t0.chdf"), &rhs_velocity(&u0)?)?;
    drop(u0);

    let both = forms.len() == 2;
    let mut runs = Vec::new();
    let mut reference: Vec<VectorField> = Vec::new();
    let mut gap: Vec<(f64, f64)> = Vec::new();
    for (i, &form) in forms.iter().enumerate() {
        let solver = config.solver.clone().with_formulation(form);
        let initial = match form {
            Formulation::Velocity => config.initial.build(&config.grid)?,
            Formulation::Momentum => config.initial.build_momentum(&config.grid)?,
        };
        let prefix = if both { format!("{}_", json!(form).as_str().unwrap_or_default()) } else { String::new() };
        let mut files = Vec::new();
        let mut k = 0;
        let meta = integrate_with(initial, &solver, |t, u| {
            let path = common.out.join(format!("{prefix}snapshot_{k:03}.chdf"));
            write_vector(&path, u)?;
            files.push(file_name(&path));
            if both && i == 0 {
                reference.push(u.clone());
            } else if both {
                let r = &reference[k];
                gap.push((t, u.minus(r)?.l2_norm_spectral() / r.l2_norm_spectral().max(f64::MIN_POSITIVE)));
            }
            if common.verbose > 0 {
                eprintln!("{form:?}: t = {t}");
            }
            k += 1;
            Ok(())
        })?;
        println!(
            "{form:?}: {} steps, H1 drift {:.3e}, max truncation {:.3e}",
            meta.steps,
            meta.energy_drift(),
            meta.max_truncation
        );
        runs.push(json!({ "formulation": form, "meta": meta, "snapshots": files }));
    }
    if let Some(&(t, g)) = gap.last() {
        println!("cross-formulation gap at t = {t}: {g:.6e}");
    }
    let diagnostics = json!({
        "version": VERSION,
        "config": config,
        "rhs_t0": "rhs_t0.chdf",
        "runs": runs,
        "formulation_gap": if both { json!(gap) } else { json!(null) },
    });
    fs::write(common.out.join("diagnostics.json"), serde_json::to_string_pretty(&diagnostics)?)?;
    Ok(())
}

/// Accepts a number or `inf`.
fn parse_exponent(text: &str) -> Result<f64> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        other => other.parse().map_err(|_| Error::Config(format!("not an exponent: {text}"))),
    }
}

fn blocks_csv(blocks: &[BlockNorm]) -> String {
    let mut out = String::from("j,lp,weighted\n");
    for b in blocks {
        out.push_str(&format!("{},{:.17e},{:.17e}\n", b.j, b.lp, b.weighted));
    }
    out
}

pub fn besov(
    common: &Common,
    field: Option<PathBuf>,
    s: Option<f64>,
    p: Option<String>,
    r: Option<String>,
) -> Result<()> {
    let mut config: BesovConfig = load(common)?;
    if field.is_some() {
        config.field = field;
    }
    if let Some(s) = s {
        config.s = s;
    }
    if let Some(p) = p {
        config.p = parse_exponent(&p)?;
    }
    if let Some(r) = r {
        config.r = parse_exponent(&r)?;
    }
    if common.print_config {
        return print_config(&config);
    }
    let params = BesovParams::new(config.s, config.p, config.r)?;
    let path = config.field.as_ref().ok_or_else(|| Error::Config("no field file given".into()))?;
    let (grid, mut comps) = chdf::read_file(path, config.dealias_fraction)?;
    let partition = DyadicPartition::new(&grid);
    let (norm, blocks) = if comps.len() == 1 {
        let u = comps.pop().expect("one component");
        (partition.besov_norm(&u, &params)?, partition.besov_blocks(&u, &params)?)
    } else if comps.len() == grid.dim {
        let u = VectorField::new(comps)?;
        (partition.besov_norm(&u, &params)?, partition.besov_blocks(&u, &params)?)
    } else {
        return Err(Error::Format(format!(
            "{} holds {} components; expected 1 or {}",
            path.display(),
            comps.len(),
            grid.dim
        )));
    };
    fs::create_dir_all(&common.out)?;
    fs::write(common.out.join("besov_blocks.csv"), blocks_csv(&blocks))?;
    println!("{norm:.17e}");
    Ok(())
}

fn experiment_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = load(common)?;
    if let Some(w) = common.workers {
        config.workers = w;
    }
    Ok(config)
}

fn sequence_params(config: &ExperimentConfig, n: u32) -> Result<SequenceParams> {
    let grid = config.grid_for(n)?;
    let (rho, plateau) = config.radii();
    let profile = build_profile(rho, plateau, &grid, config.box_tail_tolerance)?;
    SequenceParams::new(n, config.s, grid, profile)
}

pub fn sequences_verify(common: &Common) -> Result<()> {
    let config = experiment_config(common)?;
    if common.print_config {
        return print_config(&config);
    }
    config.validate()?;
    let mut csv = format!("{}\n", VerifyRow::CSV_HEADER);
    for &n in &config.n_list {
        let params = sequence_params(&config, n)?;
        let partition = DyadicPartition::new(&params.grid);
        let row = sequences::verify(&params, &config.besov(), &partition)?;
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    fs::create_dir_all(&common.out)?;
    fs::write(common.out.join("sequences_verify.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn sequences_export(common: &Common) -> Result<()> {
    let config = experiment_config(common)?;
    if common.print_config {
        return print_config(&config);
    }
    config.validate()?;
    fs::create_dir_all(&common.out)?;
    for &n in &config.n_list {
        let params = sequence_params(&config, n)?;
        for (name, field) in [("u0", sequences::make_u0n(&params)), ("v0", sequences::make_v0n(&params))] {
            let path = common.out.join(format!("{name}_n{n}.chdf"));
            write_vector(&path, &field)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

pub fn experiment(common: &Common) -> Result<()> {
    let config = experiment_config(common)?;
    if common.print_config {
        return print_config(&config);
    }
    if common.verbose > 0 {
        eprintln!("running n = {:?} on {} worker(s)", config.n_list, config.workers);
    }
    let report = run_experiment(&config)?;
    let paths = emit_report(&report, &common.out)?;
    let fits = &report.fits;
    if let Some(f) = &fits.delta0 {
        println!("delta0 slope in n: {:.4}", f.slope);
    }
    if let Some(f) = &fits.residual32_sup {
        println!("sup residual32 slope in n: {:.4} (eps_s = {})", f.slope, report.eps_s);
    }
    for f in &fits.per_n {
        println!(
            "n = {}: separation c = {:.4e}, R^2 = {:.4}, floor ratio {:.4}, residual33 exponent {:.3}",
            f.n, f.separation.c_est, f.separation.r_squared, f.floor_ratio, f.residual33_growth.gamma
        );
    }
    for r in &report.records {
        if let Some(g) = r.diagnostics.cross_check_gap {
            println!("n = {}: momentum/velocity gap at t0 {:.3e}", r.n, g);
        }
    }
    println!("wrote {}, {}, {}", paths.csv.display(), paths.summary.display(), paths.gnuplot.display());
    Ok(())
}

pub fn convergence(common: &Common) -> Result<()> {
    let config: ConvergenceConfig = load(common)?;
    if common.print_config {
        return print_config(&config);
    }
    let report = run_convergence(&config)?;
    fs::create_dir_all(&common.out)?;
    let csv = report.csv();
    fs::write(common.out.join("convergence.csv"), &csv)?;
    fs::write(common.out.join("convergence.json"), serde_json::to_string_pretty(&report)?)?;
    print!("{csv}");
    print_budget(&report);
    Ok(())
}

fn print_budget(report: &ConvergenceReport) {
    if report.budget_exceeded {
        eprintln!("warning: budget exceeded ({:.1} s > {:.1} s)", report.wall_time_s, report.config.budget_seconds);
    }
}
