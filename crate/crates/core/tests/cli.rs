use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use approx::assert_abs_diff_eq;
use serde_json::Value;
use sp_soliton::cli::{load_solution, ResultRecord};
use sp_soliton::diagnostics::diagnose;
use sp_soliton::energy::{multiplier_residual, virial_residual};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sp-soliton"))
        .args(args)
        .arg("--output_dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn result_json(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

#[test]
fn hydrogen_limit_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--z", "1", "--n_charge", "1e-8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = result_json(dir.path());
    assert_abs_diff_eq!(json["omega"].as_f64().unwrap(), -0.5, epsilon = 1e-5);
    assert_eq!(json["converged"], Value::Bool(true));
    assert_eq!(json["grid"]["n"], 4000);

    let csv = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,u,phi,U,V,Q"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 6);
    // 17 significant digits
    assert_eq!(row[1].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    assert_eq!(csv.lines().count(), 4001);
}

#[test]
fn result_json_field_order() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["--n_charge", "0.5", "--grid.n", "1000", "--grid.r_max", "30"]);
    let text = fs::read_to_string(dir.path().join("result.json")).unwrap();
    let keys = [
        "omega",
        "J",
        "kinetic",
        "hartree",
        "coulomb",
        "virial_residual",
        "multiplier_residual",
        "decay_slope",
        "decay_slope_expected",
        "a1",
        "b1",
        "far_charge",
        "iterations",
        "converged",
        "k_index",
        "z",
        "n_charge",
        "grid",
    ];
    let positions: Vec<usize> = keys
        .iter()
        .map(|k| text.find(&format!("\"{k}\":")).unwrap_or_else(|| panic!("missing {k}")))
        .collect();
    assert!(positions.windows(2).all(|p| p[0] < p[1]));
    assert!(!text.contains("time"));
}

#[test]
fn zero_potential_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--mode", "zero-potential", "--z", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no negative eigenvalue"));
}

#[test]
fn spectrum_is_negative_and_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["--mode", "spectrum", "--k_index", "3", "--grid.n", "6000", "--grid.r_max", "60"],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,omega,J,virial_residual"));
    let omegas: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(omegas.len(), 3);
    assert!(omegas.iter().all(|&w| w < 0.0));
    assert!(omegas.windows(2).all(|p| p[0] < p[1]));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "z = 1\n# fine\nscf.mixing = half\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sp-soliton"))
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3:"));

    fs::write(&cfg, "z = 1\ncolour = blue\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sp-soliton")).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2:"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "z = 2\nn_charge = 1\ngrid.n = 1000\ngrid.r_max = 20\nmode = solve\noutput_dir = {}\nseed = 3\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sp-soliton"))
        .arg(&cfg)
        .args(["--n_charge", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json = result_json(dir.path());
    assert_eq!(json["z"].as_f64(), Some(2.0));
    assert_eq!(json["n_charge"].as_f64(), Some(0.5));
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--grid.n", "2000", "--grid.r_max", "40", "--seed", "5"];
    run(a.path(), &args);
    run(b.path(), &args);
    for f in ["result.json", "solution.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn csv_round_trip_reproduces_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--z", "1.5", "--grid.n", "3000", "--grid.r_max", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let (state, record): (_, ResultRecord) = load_solution(dir.path()).unwrap();
    let report = diagnose(&state, None).unwrap();
    let e = &state.energy;
    let pairs = [
        (record.j, e.total_j),
        (record.kinetic, e.kinetic),
        (record.hartree, e.hartree),
        (record.coulomb, e.coulomb),
        (record.virial_residual, virial_residual(e).value),
        (record.multiplier_residual, multiplier_residual(state.omega, record.n_charge, e).value),
        (record.decay_slope.unwrap(), report.decay_slope.unwrap()),
        (record.decay_slope_expected, report.decay_slope_expected),
        (record.a1, report.a1),
        (record.b1, report.b1),
        (record.far_charge, report.far_charge),
    ];
    for (written, recomputed) in pairs {
        assert_abs_diff_eq!(written, recomputed, epsilon = 1e-12);
    }
}

#[test]
fn unconverged_run_writes_state_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--scf.max_iter", "2", "--grid.n", "1000", "--grid.r_max", "30"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(result_json(dir.path())["converged"], Value::Bool(false));
}

#[test]
fn verify_mode_writes_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["--mode", "verify", "--grid.n", "12000", "--grid.r_max", "120", "--seed", "4"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let diag: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    let checks = diag["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["passed"] == Value::Bool(true)));
    assert_eq!(diag["report"]["isolation"]["seed"], 4);
}

fn study(dir: &Path, extra: &[&str]) -> Vec<(usize, f64, f64, Option<f64>)> {
    let mut args = vec!["--mode", "convergence-study", "--z", "1", "--n_charge", "1e-8"];
    args.extend_from_slice(extra);
    let out = run(dir, &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,r_max,omega,richardson_order"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
                f[3].parse().ok(),
            )
        })
        .collect()
}

#[test]
fn convergence_study_orders() {
    let dir = tempfile::tempdir().unwrap();
    let rows = study(dir.path(), &["--grid.n", "2000", "--grid.r_max", "40", "--grid.stencil", "second"]);
    assert_eq!(rows.len(), 6);
    for row in rows.iter().filter_map(|r| r.3) {
        assert!((1.7..=2.3).contains(&row), "second-order stencil gave {row}");
    }
    let rows = study(dir.path(), &["--grid.n", "2000", "--grid.r_max", "40"]);
    for row in rows.iter().filter_map(|r| r.3) {
        assert!((3.5..=4.5).contains(&row), "fourth-order stencil gave {row}");
    }
    // the wall is far in the tail: extending it barely moves ω
    assert!((rows[2].2 - rows[5].2).abs() <= 1e-9);
}

#[test]
fn convergence_study_refuses_tiny_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--mode", "convergence-study", "--grid.n", "40"]);
    assert_eq!(out.status.code(), Some(1));
}
