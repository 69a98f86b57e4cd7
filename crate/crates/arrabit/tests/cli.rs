//! End-to-end checks of the `arrabit` binary: flag handling, exit codes,
//! JSON and CSV outputs, generator profiles, and run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arrabit::{load_matrix_market, RunResult};
use arrabit_core::dense_oracle;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arrabit"));
    // Keep runs hermetic: the environment must not leak a thread count.
    cmd.env_remove("ARRABIT_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn write_diag_matrix(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join(format!("diag{n}.mtx"));
    let out = run(&[
        "gen",
        "--profile",
        "diag",
        "--n",
        &n.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "gen failed: {}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn solve_reports_the_largest_values_of_a_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_diag_matrix(dir.path(), 100);
    let out = run(&[
        "solve",
        "--matrix",
        matrix.to_str().unwrap(),
        "--k",
        "5",
        "--tol",
        "1e-6",
        "--inner",
        "mpm",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: RunResult = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report.schema_version, arrabit::SCHEMA_VERSION);
    assert_eq!(report.n, 100);
    assert_eq!(report.eigenvalues.len(), 5);
    assert!(!report.history.is_empty());
    // diag(100..1): the largest five eigenvalues are 100, 99, 98, 97, 96.
    for (i, v) in report.eigenvalues.iter().enumerate() {
        let want = (100 - i) as f64;
        assert!((v - want).abs() <= 1e-6 * want, "value {i}: {v} vs {want}");
    }
    assert!(report.maxres <= 1e-5);
}

#[test]
fn solve_targets_the_smallest_end_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_diag_matrix(dir.path(), 100);
    let out = run(&[
        "solve",
        "--matrix",
        matrix.to_str().unwrap(),
        "--k",
        "5",
        "--which",
        "smallest",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: RunResult = serde_json::from_str(&stdout_str(&out)).unwrap();
    // Ascending for the smallest end: 1, 2, 3, 4, 5.
    for (i, v) in report.eigenvalues.iter().enumerate() {
        let want = (i + 1) as f64;
        assert!((v - want).abs() <= 1e-5, "value {i}: {v} vs {want}");
    }
}

#[test]
fn missing_required_flags_exit_one_with_usage() {
    let out = run(&["solve", "--k", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");
}

#[test]
fn unreadable_matrix_files_exit_one() {
    let out = run(&["solve", "--matrix", "/nonexistent/m.mtx", "--k", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = run(&[flag]);
        assert_eq!(out.status.code(), Some(0), "flag: {flag}");
    }
}

#[test]
fn stable_runs_are_byte_identical_and_history_has_the_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_diag_matrix(dir.path(), 80);
    let hist = dir.path().join("hist.csv");
    let args = [
        "solve",
        "--matrix",
        matrix.to_str().unwrap(),
        "--k",
        "4",
        "--seed",
        "3",
        "--threads",
        "0",
        "--stable-output",
        "--history",
        hist.to_str().unwrap(),
    ];
    let first = run(&args);
    assert_eq!(first.status.code(), Some(0));
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout, "two stable runs must emit identical bytes");

    let csv = std::fs::read_to_string(&hist).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("outer,maxres,spmv,rr,p,d,locked,seconds"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for row in rows {
        assert_eq!(row.split(',').count(), 8, "row: {row}");
    }
}

#[test]
fn threaded_solves_match_the_sequential_eigenvalues_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_diag_matrix(dir.path(), 80);
    let base = [
        "solve",
        "--matrix",
        matrix.to_str().unwrap(),
        "--k",
        "4",
        "--seed",
        "3",
        "--stable-output",
    ];
    let seq = run(&[&base[..], &["--threads", "0"]].concat());
    let par = run(&[&base[..], &["--threads", "3"]].concat());
    assert_eq!(seq.status.code(), Some(0));
    assert_eq!(par.status.code(), Some(0));
    let seq: RunResult = serde_json::from_str(&stdout_str(&seq)).unwrap();
    let par: RunResult = serde_json::from_str(&stdout_str(&par)).unwrap();
    assert_eq!(seq.eigenvalues, par.eigenvalues);
    assert_eq!(seq.maxres, par.maxres);
    assert_eq!(seq.stats.total_spmv, par.stats.total_spmv);
    assert_eq!(par.threads, 3);
}

#[test]
fn thread_count_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_diag_matrix(dir.path(), 40);
    let out = bin()
        .args(["solve", "--matrix", matrix.to_str().unwrap(), "--k", "2", "--stable-output"])
        .env("ARRABIT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: RunResult = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report.threads, 2);

    let out = bin()
        .args(["solve", "--matrix", matrix.to_str().unwrap(), "--k", "2"])
        .env("ARRABIT_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_diag_matrix(dir.path(), 40);
    let json = dir.path().join("run.json");
    let out = run(&[
        "solve",
        "--matrix",
        matrix.to_str().unwrap(),
        "--k",
        "3",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_str(&out).is_empty(), "report goes to the file, not stdout");
    let report: RunResult = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.eigenvalues.len(), 3);
}

#[test]
fn verify_passes_and_repeats_identically() {
    let args = ["verify", "--seeds", "3", "--n", "24"];
    let first = run(&args);
    assert_eq!(
        first.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&first.stderr)
    );
    let text = stdout_str(&first);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["bounds"]["projection"]["violated"], 0);
    assert!(report["filter_comparison"]["interpolant"]["spmv"].as_u64().unwrap() > 0);

    let second = run(&args);
    assert_eq!(first.stdout, second.stdout, "same seeds must reproduce the report");
}

#[test]
fn verify_rejects_oversized_instances() {
    let out = run(&["verify", "--seeds", "1", "--n", "2000"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("2000"), "stderr: {stderr}");
}

#[test]
fn gen_diag_produces_the_integer_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_diag_matrix(dir.path(), 100);
    let m = load_matrix_market(&path).unwrap();
    assert_eq!(m.n(), 100);
    assert_eq!(m.nnz(), 100);
    let oracle = dense_oracle(&m).unwrap();
    assert_eq!(oracle.values[0], 100.0);
    assert_eq!(oracle.values[99], 1.0);
}

#[test]
fn gen_flat_profile_has_the_requested_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.mtx");
    let out = run(&[
        "gen", "--profile", "flat", "--n", "50", "--gap", "0.99", "--seed", "1", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let m = load_matrix_market(&path).unwrap();
    let oracle = dense_oracle(&m).unwrap();
    for w in oracle.values.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio - 0.99).abs() <= 1e-8, "ratio {ratio}");
    }
}

#[test]
fn gen_clustered_profile_repeats_its_centers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clustered.mtx");
    let out = run(&[
        "gen", "--profile", "clustered", "--n", "30", "--seed", "2", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let m = load_matrix_market(&path).unwrap();
    let oracle = dense_oracle(&m).unwrap();
    for (i, v) in oracle.values.iter().enumerate() {
        let want = [3.0, 2.0, 1.0][i / 10];
        assert!((v - want).abs() <= 1e-8, "value {i}: {v} vs {want}");
    }
}

#[test]
fn gen_rejects_bad_profiles_and_gaps() {
    let out = run(&["gen", "--profile", "sawtooth", "--n", "10"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["gen", "--profile", "flat", "--n", "10", "--gap", "1.5"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["gen", "--profile", "diag", "--n", "10", "--gap", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_without_out_streams_to_stdout() {
    let out = run(&["gen", "--profile", "diag", "--n", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
    assert_eq!(text.lines().count(), 7, "header + size + five entries");
}

#[test]
fn solve_accepts_the_whole_flag_surface() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_diag_matrix(dir.path(), 60);
    let out = run(&[
        "solve",
        "--matrix",
        matrix.to_str().unwrap(),
        "--k",
        "3",
        "--which",
        "largest",
        "--tol",
        "1e-8",
        "--q",
        "2",
        "--p",
        "2",
        "--p-max",
        "3",
        "--d",
        "4",
        "--d-max",
        "10",
        "--maxit",
        "25",
        "--maxit1",
        "8",
        "--maxit2",
        "4",
        "--inner",
        "gn",
        "--filter",
        "classic",
        "--seed",
        "11",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: RunResult = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report.config.q, 2);
    assert_eq!(report.config.p, 2);
    assert_eq!(report.config.d, 4);
    assert_eq!(report.config.maxit, 25);
    assert!(report.maxres <= 1e-7);
}
