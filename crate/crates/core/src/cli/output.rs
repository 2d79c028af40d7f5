//! CSV and JSON writers, plus the reader used to reload a finished run.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StudyRow;
use crate::diagnostics::DiagnosticsReport;
use crate::energy::{multiplier_residual, virial_residual};
use crate::grid::{RadialField, RadialGrid, Stencil};
use crate::scf::SolitonState;

pub const SOLUTION_HEADER: &str = "r,u,phi,U,V,Q";
pub const SPECTRUM_HEADER: &str = "k,omega,J,virial_residual";
pub const CONVERGENCE_HEADER: &str = "n,r_max,omega,richardson_order";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub n: usize,
    pub r_max: f64,
    pub stencil: String,
}

/// Contents of `result.json`, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub omega: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub kinetic: f64,
    pub hartree: f64,
    pub coulomb: f64,
    pub virial_residual: f64,
    pub multiplier_residual: f64,
    pub decay_slope: Option<f64>,
    pub decay_slope_expected: f64,
    pub a1: f64,
    pub b1: f64,
    pub far_charge: f64,
    pub iterations: usize,
    pub converged: bool,
    pub k_index: usize,
    pub z: f64,
    pub n_charge: f64,
    pub grid: GridRecord,
}

pub fn result_record(state: &SolitonState, report: &DiagnosticsReport) -> ResultRecord {
    let e = &state.energy;
    let grid = state.grid();
    ResultRecord {
        omega: state.omega,
        j: e.total_j,
        kinetic: e.kinetic,
        hartree: e.hartree,
        coulomb: e.coulomb,
        virial_residual: virial_residual(e).value,
        multiplier_residual: multiplier_residual(state.omega, state.spec.n_charge, e).value,
        decay_slope: report.decay_slope,
        decay_slope_expected: report.decay_slope_expected,
        a1: report.a1,
        b1: report.b1,
        far_charge: report.far_charge,
        iterations: state.iterations,
        converged: state.converged,
        k_index: state.k_index,
        z: state.spec.z,
        n_charge: state.spec.n_charge,
        grid: GridRecord {
            n: grid.len(),
            r_max: grid.r_max(),
            stencil: grid.stencil().to_string(),
        },
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn write_solution_csv(path: &Path, state: &SolitonState) -> io::Result<()> {
    let r = state.grid().nodes();
    let z = state.spec.z;
    let mut out = String::with_capacity(r.len() * 160);
    out.push_str(SOLUTION_HEADER);
    out.push('\n');
    for i in 0..r.len() {
        let phi = state.phi.values()[i];
        let q = -phi - z / r[i];
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r[i],
            state.u.values()[i],
            phi,
            state.reduced.values()[i],
            state.vred.values()[i],
            q
        )
        .expect("writing to a String");
    }
    fs::write(path, out)
}

pub fn write_spectrum_csv(path: &Path, states: &[SolitonState]) -> io::Result<()> {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for s in states {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e}",
            s.k_index,
            s.omega,
            s.energy.total_j,
            virial_residual(&s.energy).value
        )
        .expect("writing to a String");
    }
    fs::write(path, out)
}

pub fn write_convergence_csv(path: &Path, rows: &[StudyRow]) -> io::Result<()> {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for row in rows {
        let order = row
            .richardson_order
            .map(|o| format!("{o:.6}"))
            .unwrap_or_default();
        writeln!(out, "{},{:.16e},{:.16e},{}", row.n, row.r_max, row.omega, order)
            .expect("writing to a String");
    }
    fs::write(path, out)
}

/// Columns of `solution.csv`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolutionTable {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub reduced: Vec<f64>,
    pub vred: Vec<f64>,
    pub q: Vec<f64>,
}

fn bad_data(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

pub fn read_solution_csv(path: &Path) -> io::Result<SolutionTable> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SOLUTION_HEADER => {}
        other => return Err(bad_data(format!("unexpected header {other:?}"))),
    }
    let mut t = SolutionTable::default();
    for (idx, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad_data(format!("row {}: {e}", idx + 2)))?;
        if vals.len() != 6 {
            return Err(bad_data(format!("row {}: expected 6 columns", idx + 2)));
        }
        t.r.push(vals[0]);
        t.u.push(vals[1]);
        t.phi.push(vals[2]);
        t.reduced.push(vals[3]);
        t.vred.push(vals[4]);
        t.q.push(vals[5]);
    }
    Ok(t)
}

/// Rebuilds the state written by a `solve` run in `dir` from `solution.csv` and
/// `result.json`. Derived quantities are recomputed from `u`.
pub fn load_solution(dir: &Path) -> Result<(SolitonState, ResultRecord), super::RunError> {
    let record: ResultRecord = serde_json::from_str(&fs::read_to_string(dir.join("result.json"))?)
        .map_err(|e| bad_data(e.to_string()))?;
    let table = read_solution_csv(&dir.join("solution.csv"))?;
    let stencil: Stencil = record
        .grid
        .stencil
        .parse()
        .map_err(|e: String| bad_data(e))?;
    let grid = RadialGrid::new(record.grid.n, record.grid.r_max, stencil)?;
    if table.u.len() != grid.len() {
        return Err(bad_data(format!(
            "solution.csv has {} rows, result.json says n = {}",
            table.u.len(),
            grid.len()
        ))
        .into());
    }
    let spec = crate::grid::ProblemSpec::new(record.z, record.n_charge, record.k_index)?;
    let u = RadialField::new(grid, table.u)?;
    let state = SolitonState::from_field(spec, u, record.omega, record.iterations, record.converged);
    Ok((state, record))
}
