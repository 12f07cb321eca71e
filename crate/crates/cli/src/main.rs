mod args;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde::de::DeserializeOwned;

use args::{Cli, Command, ConvergeArgs, DiagnoseArgs, FamilyArg, Merge, MeshInfoArgs, NonlinearArgs, SolveArgs};
use dfalab::cr_fem::{self, CrSpace};
use dfalab::harness::diagnostics::{self, DiagnosticConfig};
use dfalab::harness::{self, catalog, StudyConfig};
use dfalab::mesh::{load_mesh, regularity};
use dfalab::nonlinear::{picard_solve, verify_uniform_ellipticity, PicardOptions};
use dfalab::tpfa::{self, TpfaOptions};
use dfalab::{CgOptions, MeshFamily, Rect, Scheme};

/// L² rate expected with an exact solution; the energy-norm rate for CR and
/// any rate against a fine reference use the first-order value.
const EOC_L2_MIN: f64 = 1.9;
const EOC_FIRST_ORDER_MIN: f64 = 0.9;
const BALANCE_TOL: f64 = 1e-8;

fn load_section<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

/// Prints a gated check and returns whether it passed.
fn gate(name: &str, ok: bool, detail: impl std::fmt::Display) -> bool {
    eprintln!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn mesh_info(a: MeshInfoArgs) -> Result<bool> {
    let path = a.mesh.context("a mesh file is required")?;
    let mesh = load_mesh(&path).with_context(|| format!("loading {}", path.display()))?;
    let r = regularity(&mesh);
    println!("cells {}", mesh.num_cells());
    println!("faces {} ({} interior, {} boundary)", mesh.num_faces(), mesh.interior_faces().count(), mesh.boundary_faces().count());
    println!("vertices {}", mesh.num_vertices());
    println!("h {:.12e}", r.h);
    println!("theta {:.12e}", r.theta);
    match r.eta {
        Some(eta) => println!("eta {eta:.12e}"),
        None => println!("eta n/a (not a triangulation)"),
    }
    println!("admissibility_defect {:.12e}", r.tpfa_admissibility_defect);
    Ok(true)
}

fn solve(a: SolveArgs) -> Result<bool> {
    let scheme = a.scheme.context("--scheme is required")?;
    let problem = catalog::linear_problem(a.problem.as_deref().context("--problem is required")?)?;
    let nx = a.nx.context("--nx is required")?;
    let ny = a.ny.unwrap_or(nx);
    let family = a.family.unwrap_or(FamilyArg::default_for(scheme));
    let mesh = family.family(nx, ny, problem.domain).refine(0)?;
    let cg = CgOptions { rel_tol: a.tol.unwrap_or(CgOptions::default().rel_tol), ..CgOptions::default() };
    let mut csv = String::from("cell_or_edge_id,x,y,value\n");
    let mut ok = true;
    match scheme {
        Scheme::Tpfa => {
            let sol = tpfa::solve(&mesh, &problem, &TpfaOptions { cg, ..TpfaOptions::default() })?;
            for (k, (p, v)) in mesh.cell_points().iter().zip(sol.u.values()).enumerate() {
                writeln!(csv, "{k},{:.12e},{:.12e},{v:.12e}", p.x, p.y)?;
            }
            emit(a.out.as_deref(), &csv)?;
            let chain = sol.energy_chain();
            let balance = sol.max_scaled_balance_residual();
            let violations = sol.trans.lower_bound_violations(&mesh).len();
            println!(
                "summary scheme=tpfa problem={} cells={} cg_iterations={} residual={:.3e} h10={:.12e} l2={:.12e}",
                problem.name,
                mesh.num_cells(),
                sol.iterations,
                sol.residual,
                sol.u.norm_h10(),
                sol.u.norm_l2()
            );
            ok &= gate("energy chain", chain.holds(harness::study::ENERGY_CHAIN_TOL), format!("{chain:?}"));
            ok &= gate("flux balance", balance <= BALANCE_TOL, format!("{balance:.3e}"));
            ok &= gate("transmissivity bound", violations == 0, format!("{violations} violating faces"));
        }
        Scheme::Cr => {
            let space = CrSpace::new(&mesh)?;
            let sol = cr_fem::solve_cr(&space, &problem, &cg)?;
            for (e, (face, v)) in mesh.faces().iter().zip(sol.u.values()).enumerate() {
                writeln!(csv, "{e},{:.12e},{:.12e},{v:.12e}", face.midpoint.x, face.midpoint.y)?;
            }
            emit(a.out.as_deref(), &csv)?;
            let chain = sol.energy_chain();
            println!(
                "summary scheme=cr problem={} triangles={} dofs={} cg_iterations={} residual={:.3e} grad_l2={:.12e} l2={:.12e}",
                problem.name,
                mesh.num_cells(),
                space.num_dofs(),
                sol.iterations,
                sol.residual,
                sol.u.broken_h1_seminorm(),
                sol.u.norm_l2()
            );
            ok &= gate("energy chain", chain.holds(harness::study::ENERGY_CHAIN_TOL), format!("{chain:?}"));
        }
    }
    Ok(ok)
}

fn converge(a: ConvergeArgs) -> Result<bool> {
    let scheme = a.scheme.context("--scheme is required")?;
    let problem = a.problem.context("--problem is required")?;
    let levels = a.levels.context("--levels is required")?;
    let mut config = StudyConfig::new(scheme, problem, levels.min, levels.max);
    config.family = a.family.map(|f| f.family(2, 2, Rect::UNIT));
    if let Some(t) = a.tol {
        config.cg_tol = t;
    }
    config.reference_level = a.reference_level;
    config.jacobi = a.jacobi.unwrap_or(false);
    let report = harness::run_convergence_study(&config)?;

    emit(a.out.as_deref(), &harness::write_csv(&report))?;
    if let Some(p) = &a.json {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", p.display()))?;
    }

    let mut ok = gate("levels complete", report.complete, report.failure.as_deref().unwrap_or("all levels solved"));
    ok &= gate("energy chains", report.all_energy_chains_hold(), "every level");
    ok &= gate("L2 errors strictly decreasing", report.l2_errors_strictly_decreasing(), "whole sequence");
    if scheme == Scheme::Tpfa {
        let worst = report.levels.iter().filter_map(|l| l.balance_residual).fold(0.0, f64::max);
        ok &= gate("flux balance", worst <= BALANCE_TOL, format!("{worst:.3e}"));
        let v: usize = report.levels.iter().filter_map(|l| l.tau_bound_violations).sum();
        ok &= gate("transmissivity bound", v == 0, format!("{v} violating faces"));
    }

    // Rates are calibration, not gated: a shortfall with decaying errors is a warning.
    let l2_min = if report.reference_level.is_some() { EOC_FIRST_ORDER_MIN } else { EOC_L2_MIN };
    let mut rates = vec![("L2", report.last_eoc_l2(), l2_min)];
    if scheme == Scheme::Cr {
        rates.push(("broken H1", report.last_eoc_energy(), EOC_FIRST_ORDER_MIN));
    }
    for (name, rate, min) in rates {
        match rate {
            Some(r) if r >= min => eprintln!("PASS {name} EOC (final pair): {r:.4} >= {min}"),
            Some(r) => eprintln!("WARN {name} EOC (final pair): {r:.4} < {min}"),
            None => eprintln!("WARN {name} EOC: fewer than two levels"),
        }
    }
    Ok(ok)
}

fn diagnose(a: DiagnoseArgs) -> Result<bool> {
    let check = a.check.context("--check is required")?;
    let levels = a.levels.context("--levels is required")?;
    let mut config = DiagnosticConfig::new(check, levels.min, levels.max);
    if let Some(s) = a.seeds {
        config.seeds = s;
    }
    config.p = a.p.unwrap_or(config.p);
    config.q = a.q.unwrap_or(config.q);
    let report = diagnostics::run_diagnostics(&config)?;
    println!("level,h,theta,value,auxiliary");
    for l in &report.levels {
        let aux = l.auxiliary.map(|v| format!("{v:.12e}")).unwrap_or_default();
        println!("{},{:.12e},{:.12e},{:.12e},{aux}", l.level, l.h, l.theta, l.value);
    }
    if let Some(p) = &a.json {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(gate(check.name(), report.passed, &report.summary))
}

/// Energy constant of the scheme's own family, sampled on levels 0..5 with 64 functions each.
fn empirical_energy_constant(scheme: Scheme, a_min: f64) -> Result<f64> {
    let levels = [0, 1, 2, 3, 4, 5];
    Ok(match scheme {
        Scheme::Tpfa => diagnostics::tpfa_energy_constant(&MeshFamily::quad(2, 2, Rect::UNIT), &levels, 64, a_min)?,
        Scheme::Cr => diagnostics::cr_energy_constant(&MeshFamily::triangle(2, 2, Rect::UNIT), &levels, 64, a_min)?,
    })
}

fn nonlinear(a: NonlinearArgs) -> Result<bool> {
    let scheme = a.scheme.context("--scheme is required")?;
    let problem = catalog::nonlinear_problem(a.problem.as_deref().context("--problem is required")?)?;
    let nx = a.nx.context("--nx is required")?;
    let ny = a.ny.unwrap_or(nx);
    let defaults = PicardOptions::default();
    let opts = PicardOptions {
        tol: a.tol.unwrap_or(defaults.tol),
        max_outer: a.max_outer.unwrap_or(defaults.max_outer),
        relaxation: a.relaxation.unwrap_or(defaults.relaxation),
        ..defaults
    };
    let mut ok = true;
    match verify_uniform_ellipticity(&problem, 10_000, 0) {
        Ok(r) => {
            ok &= gate("uniform ellipticity", true, format!("min xi^T A xi {:.6}, max |A xi| {:.6}", r.min_coercivity, r.max_operator_norm))
        }
        Err(e) => ok &= gate("uniform ellipticity", false, e),
    }
    let mesh = FamilyArg::default_for(scheme).family(nx, ny, problem.domain).refine(0)?;
    let out = picard_solve(&mesh, &problem, scheme, &opts)?;
    if let Some(path) = &a.out {
        let mut csv = String::from("cell_or_edge_id,x,y,value\n");
        let points: Vec<_> = match scheme {
            Scheme::Tpfa => mesh.cell_points().to_vec(),
            Scheme::Cr => mesh.faces().iter().map(|f| f.midpoint).collect(),
        };
        for (i, (p, v)) in points.iter().zip(&out.values).enumerate() {
            writeln!(csv, "{i},{:.12e},{:.12e},{v:.12e}", p.x, p.y)?;
        }
        emit(Some(path), &csv)?;
    }
    for (k, inc) in out.history.iter().enumerate() {
        println!("outer {} increment {inc:.6e}", k + 1);
    }
    let c = empirical_energy_constant(scheme, problem.a_min)?;
    println!(
        "summary scheme={scheme} problem={} outer_iterations={} certificate={:.3e} linear_residual={:.3e} energy_norm={:.12e} bound={:.12e}",
        problem.name,
        out.outer_iterations,
        out.certificate,
        out.linear_residual,
        out.energy_norm,
        c * out.data_bound
    );
    ok &= gate("fixed-point certificate", out.certificate <= 10.0 * opts.tol, format!("{:.3e} <= {:.3e}", out.certificate, 10.0 * opts.tol));
    ok &= gate(
        "energy bound",
        out.energy_bound_holds(c),
        format!("{:.6e} <= C |Omega|^(1/2) ||F||_inf = {c:.6} * {:.6}", out.energy_norm, out.data_bound),
    );
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::MeshInfo(a) => mesh_info(a.merge(load_section(config)?)),
        Command::Solve(a) => solve(a.merge(load_section(config)?)),
        Command::Converge(a) => converge(a.merge(load_section(config)?)),
        Command::Diagnose(a) => diagnose(a.merge(load_section(config)?)),
        Command::Nonlinear(a) => nonlinear(a.merge(load_section(config)?)),
    }
}

/// Exit status 0 when every gated check passes, 1 when one fails, 2 on errors.
fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
