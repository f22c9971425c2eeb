//! End-to-end runs of the `sbsde` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sbsde::densities::{exit_density, Truncation};
use sbsde::model::{ProblemParams, Regime};

fn sbsde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbsde")).args(args).output().expect("binary runs")
}

fn sbsde_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbsde")).env("SBSDE_THREADS", threads).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn density_matches_library_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbsde(&["density", "--L", "4", "--x", "3.5", "--t", "2", "--cdf", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(dir.path(), "density.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,f_tau,exit_cdf"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 800);
    let p = ProblemParams::new(3.0, 4.0, 1000.0, Regime::OutsideBall).unwrap();
    for row in rows.iter().step_by(97) {
        let f = exit_density(3.5, 2.0, row[0], &p, Truncation::default()).unwrap().value;
        assert_eq!(row[1], f);
    }
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
    assert!(read(dir.path(), "density.svg").contains("<polyline"));
}

#[test]
fn density_mass_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbsde(&[
        "density",
        "--L",
        "1",
        "--x",
        "0.5",
        "--t",
        "0",
        "--check-mass",
        "--no-plot",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = String::from_utf8_lossy(&o.stdout).lines().find(|l| l.starts_with("mass")).unwrap().to_string();
    let mass: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(mass >= 0.999, "{line}");
    assert!(!dir.path().join("density.svg").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let o = sbsde(&["density", "--x", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage: sbsde density"), "{}", stderr(&o));
    assert_eq!(code(&sbsde(&["density", "--L", "nope"])), 2);
    assert_eq!(code(&sbsde(&["solve", "--L", "3", "--regime", "sideways"])), 2);
    assert_eq!(code(&sbsde(&["solve", "--L", "3", "--kind", "w"])), 2);
    assert_eq!(code(&sbsde(&["verify", "--suite", "nope"])), 2);
    assert_eq!(code(&sbsde(&["frobnicate"])), 2);
}

#[test]
fn hypothesis_violations_exit_with_three() {
    let o = sbsde(&["solve", "--regime", "outside", "--q", "1.5", "--L", "3"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("requires q > 2"), "{}", stderr(&o));
    assert_eq!(code(&sbsde(&["simulate", "--x0", "0"])), 3);
    assert_eq!(code(&sbsde(&["simulate", "--L", "3", "--x0", "3"])), 3);
    // A field of the inside regime asked for with outside data.
    assert_eq!(code(&sbsde(&["solve", "--regime", "outside", "--L", "2", "--vbar-n", "5"])), 3);
    assert_eq!(code(&sbsde(&["density", "--L", "1", "--x", "2"])), 3);
}

#[test]
fn verification_failure_exits_with_four() {
    // The decreasing-in-n claim for ubar_n does not hold numerically.
    let o = sbsde(&["verify", "--suite", "monotone"]);
    assert_eq!(code(&o), 4);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = sbsde(&["verify", "--suite", "density", "--report", &path.display().to_string()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["criteria"][0]["id"], 1);
    assert!(report["criteria"][0]["metrics"].as_array().unwrap().iter().all(|m| m["ok"] == true));
    assert_eq!(o.stdout, fs::read(&path).unwrap());
}

#[test]
fn solve_writes_field_and_slice() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbsde(&[
        "solve",
        "--regime",
        "outside",
        "--q",
        "3",
        "--L",
        "3",
        "--T",
        "1",
        "--m",
        "100",
        "--n",
        "50",
        "--dx",
        "0.1",
        "--dt",
        "0.01",
        "--slice",
        "x=1.5",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let field = sbsde::pde::Field::<f64>::from_csv(&read(dir.path(), "field.csv")).unwrap();
    assert_eq!(field.grid().nx(), 29);
    assert_eq!(field.grid().nt(), 100);
    let slice = read(dir.path(), "slice.csv");
    let rows: Vec<Vec<f64>> =
        slice.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r[1] >= 0.0 && r[1] < r[2]));
    for f in ["profiles.svg", "slice.svg", "run.cfg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn inside_regime_solve_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbsde(&[
        "solve",
        "--regime",
        "inside",
        "--q",
        "2",
        "--L",
        "2",
        "--T",
        "1",
        "--ubar-n",
        "50",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let field = sbsde::pde::Field::<f64>::from_csv(&read(dir.path(), "field.csv")).unwrap();
    assert_eq!(field.tag(), sbsde::pde::BoundaryTag::UbarN(50));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.cfg");
    fs::write(&cfg, "# density run\nL = 4\nx = 3.5\nt = 2\nsamples = 10\n").unwrap();
    let out = dir.path().join("o");
    let o = sbsde(&["density", "--config", &cfg.display().to_string(), "--samples", "20", "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&out, "density.csv").lines().count(), 21);
    assert!(read(&out, "run.cfg").contains("samples = 20\n"));

    fs::write(&cfg, "L = 4\nwidth = 3\n").unwrap();
    let o = sbsde(&["density", "--config", &cfg.display().to_string(), "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown config key 'width'"));
}

#[test]
fn simulate_from_field_writes_paths_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let fdir = dir.path().join("f");
    assert_eq!(code(&sbsde(&["solve", "--L", "3", "--out", &out_arg(&fdir)])), 0);
    let field = fdir.join("field.csv").display().to_string();
    let sdir = dir.path().join("s");
    let o = sbsde(&[
        "simulate",
        "--from-field",
        &field,
        "--x0",
        "1.5",
        "--paths",
        "2",
        "--seed",
        "7",
        "--out",
        &out_arg(&sdir),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for i in 0..2 {
        let csv = read(&sdir, &format!("path_{i}.csv"));
        assert!(csv.starts_with("k,t,w,y,z,exited_flag\n"));
        assert!(sdir.join(format!("path_{i}.svg")).exists());
    }
    assert!(read(&sdir, "summary.csv").contains("exit_cdf,"));

    let stats = dir.path().join("stats");
    let o = sbsde(&[
        "simulate",
        "--from-field",
        &field,
        "--paths",
        "20000",
        "--dt-sim",
        "0.01",
        "--stats-only",
        "--out",
        &out_arg(&stats),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!stats.join("path_0.csv").exists());
    let summary = read(&stats, "summary.csv");
    let z: f64 = summary.lines().find_map(|l| l.strip_prefix("abs_gap_over_se,")).unwrap().parse().unwrap();
    assert!(z < 4.0, "{summary}");
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "svg"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_are_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "L = 3\nq = 3\nm = 100\nn = 50\nx0 = 1.0\npaths = 64\nseed = 11\ndt-sim = 0.005\n").unwrap();
    let cfg = cfg.display().to_string();
    let mut results = Vec::new();
    for (j, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("r{j}"));
        let o = sbsde_threads(threads, &["simulate", "--config", &cfg, "--out", &out_arg(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        results.push(csv_files(&out));
    }
    assert!(results[0].len() > 60);
    assert_eq!(results[0], results[1]);
    assert_eq!(results[0], results[2]);

    // The written configuration alone reproduces the run.
    let again = dir.path().join("again");
    let written = dir.path().join("r0").join("run.cfg").display().to_string();
    let o = sbsde(&["simulate", "--config", &written, "--out", &out_arg(&again)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv_files(&again), results[0]);
}
