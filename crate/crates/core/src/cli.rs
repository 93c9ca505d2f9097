//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O, 2 configuration or input, 3 solve failure,
//! 4 mesh failure, 5 resonance pole or (near) eigenvalue.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::warn;
use serde_json::json;

use crate::cell_problem::{cell_json, effective_tensor, solve_cell, write_cell_json, EffectiveTensor};
use crate::config::RunConfig;
use crate::effective::{
    frequency_sweep, interior_decay_ratio, negative_band, solve_effective, weak_form_check, write_sweep_csv,
    EffectiveCoefficients,
};
use crate::error::{Error, Result};
use crate::geometry::sample_areas;
use crate::mesh::io::{write_dump, write_values, write_vtk};
use crate::mesh::{
    mesh_macro_domain, mesh_perforated_domain, mesh_periodic_cell, mesh_unit_cell, PerforatedOptions,
};
use crate::microscale::{resonator_observables, solve_microscale, write_observables_csv};
use crate::verification::{convergence_study, summarize, write_convergence_csv, StudyOptions};

#[derive(Debug, Parser)]
#[command(name = "helmres", version, about = "Helmholtz resonator homogenization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file; defaults are used for anything not given.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized checks (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve the cell problems and write the effective tensor.
    Cell,
    /// Evaluate the effective model over a frequency grid.
    Sweep,
    /// Solve the effective problem at one frequency.
    Effective,
    /// Solve the resolved problem at one scale.
    Micro,
    /// Compare resolved and effective solutions over a list of scales.
    Converge,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli, stdout)),
            Err(e) => Err(Error::Input(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Error::Input(format!("cannot read {}: {io}", p.display())),
            other => other,
        })?,
        None => RunConfig::parse("")?,
    };
    if let Some(s) = cli.seed {
        cfg.study.seed = s;
    }
    fs::create_dir_all(&cli.out)?;
    fs::write(cli.out.join("config.resolved"), cfg.resolved())?;
    match cli.command {
        Command::Cell => cmd_cell(&cfg, &cli.out, stdout),
        Command::Sweep => cmd_sweep(&cfg, &cli.out, stdout),
        Command::Effective => cmd_effective(&cfg, &cli.out, stdout),
        Command::Micro => cmd_micro(&cfg, &cli.out, stdout),
        Command::Converge => cmd_converge(&cfg, &cli.out, stdout),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn cell_tensor(cfg: &RunConfig) -> Result<(EffectiveTensor, Vec<f64>)> {
    let mesh = match &cfg.cell {
        None => mesh_periodic_cell(None, cfg.solver.cell_h)?,
        Some(c) => mesh_unit_cell(c, cfg.solver.cell_h)?,
    };
    let sol = solve_cell(Arc::new(mesh), 1e-12)?;
    Ok((effective_tensor(&sol)?, sol.residuals.clone()))
}

fn coefficients(cfg: &RunConfig) -> Result<EffectiveCoefficients> {
    let cell = cfg.resonator()?;
    if cell.dim != 2 {
        return Err(Error::Input("effective and resolved solves are two-dimensional only".into()));
    }
    let (t, _) = cell_tensor(cfg)?;
    let mut co = EffectiveCoefficients::new(t, cell.constants()?);
    co.pole_guard = cfg.solver.pole_guard;
    Ok(co)
}

fn boundary_data(cfg: &RunConfig) -> impl Fn([f64; 2], f64) -> f64 + Sync + Send + 'static {
    let e = cfg.physics.g_expr.clone();
    move |x, w| e.eval(x, w)
}

fn cmd_cell(cfg: &RunConfig, out: &Path, stdout: &mut (dyn Write + Send)) -> Result<()> {
    if let Some(cell) = &cfg.cell {
        if cell.dim == 3 {
            let c = cell.constants()?;
            let value = json!({
                "A_eff": null,
                "constants": {"A": c.a_cross, "L": c.l_chan, "V": c.v_res, "Q": c.q_ext, "omega_star_sq": c.omega_star_sq},
                "mesh_h": null,
                "residuals": [],
            });
            write_cell_json(&value, create(out, "cell.json")?)?;
            warn!("three-dimensional cell: constants only");
            writeln!(stdout, "A = {}  L = {}  V = {}  Q = {}  omega*^2 = {}", c.a_cross, c.l_chan, c.v_res, c.q_ext, c.omega_star_sq)?;
            return Ok(());
        }
    }
    let (t, residuals) = cell_tensor(cfg)?;
    let constants = cfg.cell.as_ref().map(|c| c.constants()).transpose()?;
    let value = cell_json(&t, constants.as_ref(), cfg.solver.cell_h, &residuals);
    write_cell_json(&value, create(out, "cell.json")?)?;
    let a = t.a_eff;
    writeln!(stdout, "A_eff = [[{:.10}, {:.3e}], [{:.3e}, {:.10}]]", a[0][0], a[0][1], a[1][0], a[1][1])?;
    if let (Some(cell), Some(c)) = (&cfg.cell, constants) {
        writeln!(stdout, "A = {}  L = {}  V = {}  Q = {}  omega*^2 = {}", c.a_cross, c.l_chan, c.v_res, c.q_ext, c.omega_star_sq)?;
        let s = sample_areas(cell, cfg.study.eps, 1_000_000, cfg.study.seed);
        writeln!(
            stdout,
            "sampled |R| = {:.5} (+- {:.1e}), |Q| = {:.5} (+- {:.1e}), seed {}",
            s.resonator,
            s.standard_error(c.v_res),
            s.exterior,
            s.standard_error(c.q_ext),
            cfg.study.seed
        )?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, out: &Path, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let grid = cfg
        .physics
        .omega_sq_grid
        .as_ref()
        .ok_or_else(|| Error::Input("sweep needs omega_grid or omega_sq_grid in [physics]".into()))?;
    let co = coefficients(cfg)?;
    let mesh = Arc::new(mesh_macro_domain(&cfg.domain, cfg.solver.mesh_h)?);
    let g = boundary_data(cfg);
    let table = frequency_sweep(&co, grid, mesh, &g, cfg.solver.method, cfg.solver.tolerance);
    write_sweep_csv(&table, create(out, "sweep.csv")?)?;
    let (lo, hi) = negative_band(&co.constants);
    writeln!(stdout, "negative band: omega^2 in ({lo:.12}, {hi:.12})")?;
    for (a, b) in &table.sign_changes {
        writeln!(stdout, "sign change between omega^2 = {a} and {b}")?;
    }
    for r in &table.rows {
        writeln!(stdout, "{:>12.6} {:>14.6e} {:>14.6e} {}", r.omega_sq, r.lambda_eff, r.multiplier_m, r.status)?;
    }
    Ok(())
}

fn cmd_effective(cfg: &RunConfig, out: &Path, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let co = coefficients(cfg)?;
    let mesh = Arc::new(mesh_macro_domain(&cfg.domain, cfg.solver.mesh_h)?);
    let g = boundary_data(cfg);
    let sol = solve_effective(mesh.clone(), &co, cfg.physics.omega, &g, cfg.solver.method, cfg.solver.tolerance)?;
    let wf = weak_form_check(&sol, &co, 20, cfg.study.seed)?;
    write_dump(&mesh, create(out, "effective.mesh")?)?;
    write_values(&sol.v.values, create(out, "effective_v.txt")?)?;
    write_values(&sol.w.values, create(out, "effective_w.txt")?)?;
    write_values(&sol.j.values, create(out, "effective_j.txt")?)?;
    write_vtk(
        &mesh,
        &[("v", &sol.v.values), ("w", &sol.w.values), ("j", &sol.j.values)],
        create(out, "effective.vtk")?,
    )?;
    writeln!(stdout, "omega^2 = {}  Lambda_eff = {}  m = {}", cfg.physics.omega.powi(2), sol.lambda, sol.multiplier)?;
    writeln!(stdout, "relative residual = {:.3e}  weak-form residual = {wf:.3e}", sol.report.relative_residual)?;
    if let Some(d) = &cfg.domain.d_rect {
        writeln!(stdout, "interior decay ratio = {:.6}", interior_decay_ratio(&sol.v, d, 256))?;
    }
    Ok(())
}

fn perforated_options(cfg: &RunConfig) -> PerforatedOptions {
    PerforatedOptions {
        max_triangles: cfg.solver.max_triangles,
        ..PerforatedOptions::with_h_cell(cfg.solver.h_cell)
    }
}

fn cmd_micro(cfg: &RunConfig, out: &Path, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let cell = cfg.resonator()?;
    let pm = mesh_perforated_domain(&cfg.domain, cell, cfg.study.eps, &perforated_options(cfg))?;
    let g = boundary_data(cfg);
    let sol = solve_microscale(&pm, cfg.physics.omega, &g, cfg.solver.method, cfg.solver.tolerance)?;
    let obs = resonator_observables(&sol, cell, &cfg.domain)?;
    write_dump(&pm.mesh, create(out, "micro.mesh")?)?;
    write_values(&sol.u.values, create(out, "micro_u.txt")?)?;
    write_vtk(&pm.mesh, &[("u", &sol.u.values)], create(out, "micro.vtk")?)?;
    write_observables_csv(&obs, create(out, "observables.csv")?)?;
    writeln!(
        stdout,
        "eps = {}  triangles = {}  resonators = {}  ||u||_L2 = {:.6}  relative residual = {:.3e}",
        pm.eps,
        pm.mesh.num_triangles(),
        pm.lattice.len(),
        sol.l2_total,
        sol.report.relative_residual
    )?;
    Ok(())
}

fn cmd_converge(cfg: &RunConfig, out: &Path, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let cell = cfg.resonator()?;
    let co = coefficients(cfg)?;
    let opts = StudyOptions {
        h_macro: cfg.solver.mesh_h,
        perforated: perforated_options(cfg),
        method: cfg.solver.method,
        tol: cfg.solver.tolerance,
    };
    let g = boundary_data(cfg);
    let report = convergence_study(&cfg.domain, cell, &co, cfg.physics.omega, &cfg.study.eps_list, &g, &opts)?;
    write_convergence_csv(&report, create(out, "convergence.csv")?)?;
    writeln!(stdout, "{:>10} {:>14} {:>14} {:>14} {:>14} {:>10}", "eps", "ext_error", "interior", "flow_rule", "inlet_R", "status")?;
    for r in &report.rows {
        writeln!(
            stdout,
            "{:>10.6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>10}",
            r.eps, r.rel_l2_error_exterior, r.interior_avg_error, r.flow_rule_residual, r.inlet_gap_r, r.status
        )?;
    }
    for line in summarize(&report, 0.15) {
        writeln!(stdout, "{line}")?;
    }
    Ok(())
}
