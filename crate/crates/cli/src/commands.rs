use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use cdt_core::bilevel::{cdt_solve, interior_tau, solve_knapsack, UpperSolver};
use cdt_core::knapsack::{lkp_solve_perturbed, KnapsackInstance, SolveReport, SolveStatus};
use cdt_core::oracle::{brute_force, random_family, Family};
use cdt_core::Error;

use crate::args::{Cli, Command};
use crate::config::TopoConfig;
use crate::output::{
    energy_rows, write_energy_csv, write_heat_ppm, write_pgm, OracleSummary, Timings, TopoSummary,
};
use crate::{exit, CliError, CliResult};

/// Largest family size `oracle-check` accepts.
pub const ORACLE_MAX_N: usize = 20;

const DEFAULT_TOPO_DIR: &str = "cdt-out";

pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::SolveKnap {
            instance,
            solver,
            out,
            beta,
        } => solve_knap(&instance, solver.into(), out.as_deref(), beta),
        Command::OracleCheck {
            family,
            count,
            n,
            seed,
            solver,
            beta,
            out,
        } => oracle_check(family.into(), count, n, seed, solver.map(Into::into), beta, out.as_deref()),
        Command::Topo {
            config,
            out,
            seed,
            solver,
            beta,
            mu,
            omega,
        } => {
            let mut cfg = TopoConfig::from_file(&config).map_err(CliError::input)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = solver {
                cfg.solver.choice = s.into();
            }
            if let Some(b) = beta {
                cfg.solver.beta_schedule = Some(vec![b]);
            }
            if let Some(m) = mu {
                cfg.volume.mu = m;
            }
            if omega.is_some() {
                cfg.volume.omega = omega;
            }
            if let Some(o) = out {
                cfg.output.dir = Some(o);
            }
            topo(&cfg)
        }
    }
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidInstance(_)
            | Error::InvalidParameter(_)
            | Error::NonInteger(_)
            | Error::TooLarge { .. }
            | Error::Json(_)
            | Error::Io(_)
    )
}

/// Input errors map to 1, numerical failures to `numeric_code`.
fn core_error(e: Error, numeric_code: u8) -> CliError {
    let code = if is_input_error(&e) { exit::INPUT } else { numeric_code };
    CliError::with_code(code, e)
}

pub fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Unique | SolveStatus::CapacitySlack => exit::OK,
        SolveStatus::Degenerate => exit::DEGENERATE,
        SolveStatus::DualBoundaryFailure => exit::DUAL_BOUNDARY,
    }
}

fn check_solver(inst: &KnapsackInstance, solver: UpperSolver) -> CliResult<()> {
    if !inst.is_linear() && !solver.is_quadratic() {
        return Err(CliError::input(anyhow!(
            "instance has an interaction matrix Q; use --solver qkp-beta or qkp-alpha"
        )));
    }
    Ok(())
}

fn solve(inst: &KnapsackInstance, solver: UpperSolver, beta: Option<f64>) -> Result<SolveReport, Error> {
    let schedule = beta.map(|b| vec![b]);
    solve_knapsack(inst, solver, schedule.as_deref(), interior_tau(inst))
}

pub fn solve_knap(
    instance: &Path,
    solver: UpperSolver,
    out: Option<&Path>,
    beta: Option<f64>,
) -> CliResult<u8> {
    let inst = KnapsackInstance::from_json_file(instance)
        .map_err(|e| CliError::input(anyhow!(e).context(instance.display().to_string())))?;
    check_solver(&inst, solver)?;
    let report = solve(&inst, solver, beta).map_err(|e| core_error(e, exit::DUAL_BOUNDARY))?;
    let json = report.to_json_string() + "\n";
    match out {
        Some(path) => write(path, json.as_bytes())?,
        None => print!("{json}"),
    }
    log::info!("status {} value {}", report.status, report.primal_value);
    Ok(status_code(report.status))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::input)
}

pub fn oracle_check(
    family: Family,
    count: usize,
    n: usize,
    seed: u64,
    solver: Option<UpperSolver>,
    beta: Option<f64>,
    out: Option<&Path>,
) -> CliResult<u8> {
    if n > ORACLE_MAX_N {
        return Err(CliError::input(anyhow!(
            "n = {n} exceeds the oracle limit {ORACLE_MAX_N}"
        )));
    }
    let solver = solver.unwrap_or(match family {
        Family::Linear => UpperSolver::LkpAnalytic,
        Family::Quadratic => UpperSolver::QkpAlpha,
    });
    if family == Family::Quadratic && !solver.is_quadratic() {
        return Err(CliError::input(anyhow!(
            "quadratic family needs --solver qkp-beta or qkp-alpha"
        )));
    }
    let insts = random_family(family, count, n, seed).map_err(CliError::input)?;
    let mut s = OracleSummary {
        family: serde_json::to_value(family).expect("serializes").as_str().unwrap_or("").into(),
        solver: serde_json::to_value(solver).expect("serializes").as_str().unwrap_or("").into(),
        count,
        n,
        seed,
        ..Default::default()
    };
    for (k, inst) in insts.iter().enumerate() {
        let oracle = brute_force(inst).map_err(CliError::input)?;
        let report = match solve(inst, solver, beta) {
            Ok(r) => r,
            Err(e) if is_input_error(&e) => return Err(CliError::input(e)),
            Err(e) => {
                log::warn!("instance {k}: {e}");
                s.dual_boundary_failure += 1;
                continue;
            }
        };
        let close = |z, tol: f64| {
            inst.is_feasible(z)
                && (inst.objective(z) - oracle.optimum).abs() <= tol * (1.0 + oracle.optimum.abs())
        };
        match report.status {
            SolveStatus::Unique | SolveStatus::CapacitySlack => {
                if report.status == SolveStatus::Unique {
                    s.unique += 1;
                    s.unique_with_multiple_optima += usize::from(!oracle.is_unique());
                    let rel = (report.primal_value - report.dual_value).abs()
                        / (1.0 + report.primal_value.abs());
                    s.max_relative_gap = s.max_relative_gap.max(rel);
                } else {
                    s.capacity_slack += 1;
                }
                if !close(&report.z, 1e-9) {
                    s.mismatches += 1;
                    s.mismatch_indices.push(k);
                }
            }
            SolveStatus::Degenerate => {
                s.degenerate += 1;
                s.degenerate_with_unique_optimum += usize::from(oracle.is_unique());
                if inst.is_linear() {
                    let (_, rep) = lkp_solve_perturbed(inst, 1e-9, seed.wrapping_add(k as u64))
                        .map_err(|e| core_error(e, exit::DUAL_BOUNDARY))?;
                    s.perturbed_resolves += 1;
                    s.perturbed_mismatches += usize::from(!close(&rep.z, 1e-5));
                }
            }
            SolveStatus::DualBoundaryFailure => s.dual_boundary_failure += 1,
        }
    }
    let json = pretty(&s);
    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(CliError::input)?;
        write(&dir.join("summary.json"), json.as_bytes())?;
    }
    print!("{json}");
    Ok(if s.mismatches == 0 { exit::OK } else { exit::MISMATCH })
}

/// Files written by [`topo`], relative to the output directory.
pub mod topo_files {
    pub const DENSITY: &str = "density.pgm";
    pub const ENERGY_CSV: &str = "energy.csv";
    pub const ENERGY_PPM: &str = "energy.ppm";
    pub const TRACE: &str = "trace.jsonl";
    pub const SUMMARY: &str = "summary.json";
    pub const TIMINGS: &str = "timings.json";
}

pub fn topo(cfg: &TopoConfig) -> CliResult<u8> {
    let cdt = cfg.cdt_config().map_err(CliError::input)?;
    let model = cfg.mesh.build().map_err(CliError::input)?;
    let dir: PathBuf = cfg.output.dir.clone().unwrap_or_else(|| DEFAULT_TOPO_DIR.into());
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CliError::input)?;

    let res = cdt_solve(&model, &cdt).map_err(|e| core_error(e, exit::NOT_CONVERGED))?;
    let records = &res.trace.records;
    let summary = TopoSummary {
        nelx: cfg.mesh.nelx,
        nely: cfg.mesh.nely,
        v_c: cdt.v_c,
        mu: cdt.mu,
        omega: res.omega,
        seed: cdt.seed,
        compliance: res.energies.compliance,
        volume: res.z.volume(),
        iterations: res.trace.len(),
        schedule_length: res.schedule.len(),
        converged: res.converged,
        perturbed_iterations: records.iter().filter(|r| r.perturbed).count(),
        tie_broken_iterations: records.iter().filter(|r| r.tie_broken).count(),
    };
    let timings = Timings {
        total_seconds: res.seconds,
        fem_seconds: records.iter().map(|r| r.fem_seconds).sum(),
        knapsack_seconds: records.iter().map(|r| r.knapsack_seconds).sum(),
    };
    let rows = energy_rows(&res.z, &res.energies.c, model.eps_min());
    let stored: Vec<f64> = rows.iter().map(|r| r.stored).collect();

    use topo_files::*;
    write(&dir.join(DENSITY), &write_pgm(&res.z))?;
    write(&dir.join(ENERGY_CSV), write_energy_csv(&rows).as_bytes())?;
    write(&dir.join(ENERGY_PPM), &write_heat_ppm(model.mesh(), &stored))?;
    write(&dir.join(TRACE), res.trace.to_jsonl().as_bytes())?;
    write(&dir.join(SUMMARY), pretty(&summary).as_bytes())?;
    write(&dir.join(TIMINGS), pretty(&timings).as_bytes())?;

    log::info!(
        "compliance {:.6e}, volume {}, {} iterations, converged {}, {:.3} s",
        summary.compliance,
        summary.volume,
        summary.iterations,
        summary.converged,
        timings.total_seconds
    );
    if res.converged {
        Ok(exit::OK)
    } else {
        log::warn!("no convergence within the iteration cap; outputs written");
        Ok(exit::NOT_CONVERGED)
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("summary serializes") + "\n"
}
