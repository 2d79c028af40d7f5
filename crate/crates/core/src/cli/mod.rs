//! Batch front end: reads a run configuration, dispatches to the solver and
//! writes plot-ready CSV and JSON files.
//!
//! Exit codes: `0` on success, `2` when no solitary wave exists for the given
//! parameters, `1` for any other failure.

pub mod config;
mod output;

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ConfigError, Mode, RunConfig};
pub use output::{load_solution, read_solution_csv, result_record, ResultRecord, SolutionTable};

use crate::diagnostics::{diagnose, DiagnosticsReport, ISOLATION_TOL_OMEGA, ISOLATION_TOL_U};
use crate::eigen::build_effective_potential;
use crate::energy::{multiplier_residual, virial_residual};
use crate::error::SolitonError;
use crate::grid::RadialGrid;
use crate::poisson::electric_potential;
use crate::scf::{initial_guess, solve, spectrum_sweep, SolitonState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NO_SOLITARY_WAVE: i32 = 2;

/// Smallest `grid.n` accepted by the convergence study.
pub const MIN_STUDY_NODES: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolitonError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Checks(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(e) if e.is_no_solitary_wave() => EXIT_NO_SOLITARY_WAVE,
            _ => EXIT_FAILURE,
        }
    }
}

/// Parses `args` (without the program name), runs, and returns the exit code.
pub fn run(args: &[String]) -> i32 {
    let result = config::parse_args(args)
        .map_err(RunError::from)
        .and_then(|(path, overrides)| Ok(RunConfig::load(path.as_deref(), overrides)?))
        .and_then(|cfg| execute(&cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed configuration.
pub fn execute(cfg: &RunConfig) -> Result<(), RunError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    match cfg.mode {
        Mode::Solve => run_solve(cfg),
        Mode::Spectrum => run_spectrum(cfg),
        Mode::ZeroPotential => run_zero_potential(cfg),
        Mode::Verify => run_verify(cfg),
        Mode::ConvergenceStudy => run_convergence_study(cfg),
    }
}

fn base_grid(cfg: &RunConfig) -> Result<Arc<RadialGrid>, SolitonError> {
    RadialGrid::new(cfg.grid_n, cfg.grid_r_max, cfg.stencil)
}

/// Grid for the configured state: extent and node count scale with `k²`.
fn state_grid(cfg: &RunConfig) -> Result<Arc<RadialGrid>, SolitonError> {
    crate::scf::grid_for_state(&*base_grid(cfg)?, cfg.problem.k_index)
}

fn write_state(cfg: &RunConfig, state: &SolitonState, report: Option<&DiagnosticsReport>) -> Result<(), RunError> {
    let dir = &cfg.output_dir;
    output::write_solution_csv(&dir.join("solution.csv"), state)?;
    let owned;
    let report = match report {
        Some(r) => r,
        None => {
            owned = diagnose(state, None)?;
            &owned
        }
    };
    let record = result_record(state, report);
    output::write_json(&dir.join("result.json"), &record)?;
    Ok(())
}

/// Solves, writing whatever state is available even when the SCF stops early.
fn solve_and_write(cfg: &RunConfig) -> Result<SolitonState, RunError> {
    let grid = state_grid(cfg)?;
    match solve(&cfg.problem, &grid, &cfg.scf, None) {
        Ok(state) => Ok(state),
        Err(SolitonError::MaxIterations {
            iterations,
            last_domega,
            state,
        }) => {
            write_state(cfg, &state, None)?;
            Err(RunError::Solver(SolitonError::MaxIterations {
                iterations,
                last_domega,
                state,
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn run_solve(cfg: &RunConfig) -> Result<(), RunError> {
    let state = solve_and_write(cfg)?;
    write_state(cfg, &state, None)?;
    println!(
        "omega = {:.12}  J = {:.12}  iterations = {}",
        state.omega, state.energy.total_j, state.iterations
    );
    Ok(())
}

fn run_spectrum(cfg: &RunConfig) -> Result<(), RunError> {
    let k_max = cfg.problem.k_index;
    let states = spectrum_sweep(&cfg.problem.with_k(1), &*base_grid(cfg)?, &cfg.scf, k_max)?;
    output::write_spectrum_csv(&cfg.output_dir.join("spectrum.csv"), &states)?;
    for s in &states {
        println!("k = {}  omega = {:.12}", s.k_index, s.omega);
    }
    Ok(())
}

fn run_zero_potential(cfg: &RunConfig) -> Result<(), RunError> {
    let grid = state_grid(cfg)?;
    // the potential a trial density produces, as seen by the linear problem
    let guess = initial_guess(&cfg.problem, &grid)?;
    let q = build_effective_potential(&electric_potential(&guess), &cfg.problem);
    let q_min = q.q.values().iter().copied().fold(f64::INFINITY, f64::min);
    log::info!("minimum of the effective potential for the trial density: {q_min:e}");
    if cfg.problem.z == 0.0 && q_min < 0.0 {
        return Err(RunError::Checks(format!(
            "effective potential must be nonnegative for z = 0, found {q_min:e}"
        )));
    }
    let state = solve_and_write(cfg)?;
    write_state(cfg, &state, None)?;
    println!("solitary wave found: omega = {:.12}", state.omega);
    Ok(())
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    report: &'a DiagnosticsReport,
    gradient_residual: f64,
    checks: Vec<Check>,
}

fn run_verify(cfg: &RunConfig) -> Result<(), RunError> {
    let state = solve_and_write(cfg)?;
    let isolation = (state.k_index == 1).then_some((&cfg.scf, 0.01, cfg.seed));
    let report = diagnose(&state, isolation)?;
    write_state(cfg, &state, Some(&report))?;

    let e = &state.energy;
    let mut checks = vec![
        Check {
            name: "omega_negative",
            value: state.omega,
            limit: 0.0,
            passed: state.omega < 0.0,
        },
        Check {
            name: "virial_residual",
            value: virial_residual(e).value,
            limit: 1e-5,
            passed: virial_residual(e).value <= 1e-5,
        },
        Check {
            name: "multiplier_residual",
            value: multiplier_residual(state.omega, state.spec.n_charge, e).value,
            limit: 1e-6,
            passed: multiplier_residual(state.omega, state.spec.n_charge, e).value <= 1e-6,
        },
        Check {
            name: "origin_u2pp",
            value: report.u2pp_check,
            limit: 1e-2,
            passed: report.u2pp_check <= 1e-2,
        },
        Check {
            name: "vprime_min",
            value: report.vprime_min,
            limit: -1e-12,
            passed: report.vprime_min >= -1e-12,
        },
        Check {
            name: "far_charge",
            value: report.far_charge,
            limit: 1e-3,
            passed: (report.far_charge - state.spec.n_charge).abs() <= 1e-3,
        },
    ];
    let decay_err = report
        .decay_slope
        .map(|s| ((s - report.decay_slope_expected) / report.decay_slope_expected).abs())
        .unwrap_or(f64::INFINITY);
    checks.push(Check {
        name: "decay_slope",
        value: decay_err,
        limit: 0.02,
        passed: decay_err <= 0.02,
    });
    if let Some(iso) = &report.isolation {
        checks.push(Check {
            name: "isolation_du",
            value: iso.du,
            limit: ISOLATION_TOL_U,
            passed: iso.du <= ISOLATION_TOL_U,
        });
        checks.push(Check {
            name: "isolation_domega",
            value: iso.domega,
            limit: ISOLATION_TOL_OMEGA,
            passed: iso.domega <= ISOLATION_TOL_OMEGA,
        });
    }
    for t in &report.schwartz_exponents {
        checks.push(Check {
            name: match t.weight_power {
                2 => "tail_r2",
                4 => "tail_r4",
                _ => "tail_r8",
            },
            value: t.exponent,
            limit: 0.0,
            passed: t.decreasing,
        });
    }
    let verify = VerifyReport {
        report: &report,
        gradient_residual: state.gradient_residual(),
        checks,
    };
    output::write_json(&cfg.output_dir.join("diagnostics.json"), &verify)?;
    let failed: Vec<&str> = verify
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    for c in &verify.checks {
        println!(
            "{:<20} {:>14.6e}  {}",
            c.name,
            c.value,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::Checks(format!("checks failed: {}", failed.join(", "))))
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub r_max: f64,
    pub omega: f64,
    pub richardson_order: Option<f64>,
}

/// Observed order from three solutions at spacings `4h, 2h, h`.
pub fn richardson_order(coarse: f64, mid: f64, fine: f64) -> f64 {
    ((coarse - mid) / (mid - fine)).abs().log2()
}

/// Solves at `n/4, n/2, n` for `r_max` and for `1.5 r_max` (node counts scaled to
/// keep the spacing), and fits the observed order within each extent.
pub fn convergence_study(cfg: &RunConfig) -> Result<Vec<StudyRow>, RunError> {
    if cfg.grid_n < MIN_STUDY_NODES {
        return Err(RunError::Checks(format!(
            "convergence study needs grid.n >= {MIN_STUDY_NODES}, got {}",
            cfg.grid_n
        )));
    }
    let k = cfg.problem.k_index;
    let scale = (k * k) as f64;
    let mut jobs = Vec::new();
    for ext in [1.0, 1.5] {
        for div in [4usize, 2, 1] {
            let n = ((cfg.grid_n as f64 * ext).round() as usize / div) * k * k;
            jobs.push((n, cfg.grid_r_max * ext * scale));
        }
    }
    let omegas: Vec<f64> = jobs
        .par_iter()
        .map(|&(n, r_max)| {
            let grid = RadialGrid::new(n, r_max, cfg.stencil)?;
            solve(&cfg.problem, &grid, &cfg.scf, None).map(|s| s.omega)
        })
        .collect::<Result<_, SolitonError>>()?;
    let mut rows: Vec<StudyRow> = jobs
        .iter()
        .zip(&omegas)
        .map(|(&(n, r_max), &omega)| StudyRow {
            n,
            r_max,
            omega,
            richardson_order: None,
        })
        .collect();
    for group in rows.chunks_mut(3) {
        let order = richardson_order(group[0].omega, group[1].omega, group[2].omega);
        group[2].richardson_order = Some(order);
    }
    Ok(rows)
}

fn run_convergence_study(cfg: &RunConfig) -> Result<(), RunError> {
    let rows = convergence_study(cfg)?;
    output::write_convergence_csv(&cfg.output_dir.join("convergence.csv"), &rows)?;
    for r in &rows {
        println!(
            "n = {:>7}  r_max = {:>8.2}  omega = {:.15}{}",
            r.n,
            r.r_max,
            r.omega,
            r.richardson_order
                .map(|o| format!("  order = {o:.3}"))
                .unwrap_or_default()
        );
    }
    Ok(())
}

/// Thread count from `SP_SOLITON_THREADS`, defaulting to one.
pub fn thread_count() -> usize {
    std::env::var("SP_SOLITON_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Whether `dir` holds the files of a `solve` run.
pub fn has_solution(dir: &Path) -> bool {
    dir.join("solution.csv").is_file() && dir.join("result.json").is_file()
}
