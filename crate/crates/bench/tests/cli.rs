use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(bench(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bench(&["run", "--kappa", "abc"]).status.code(), Some(1));
    assert_eq!(bench(&["run", "--grid", "5x1x1x1"]).status.code(), Some(1));
    assert_eq!(bench(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_paper_accepts_bundled_and_rejects_perturbed() {
    for t in ["table1.csv", "table2.csv"] {
        let out = bench(&["validate-paper", "--table", &data(t)]);
        assert_eq!(out.status.code(), Some(0));
        assert!(stdout(&out).contains("consistent"));
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let text = std::fs::read_to_string(data("table1.csv")).unwrap().replace("9088.72", "9188.72");
    std::fs::write(&bad, text).unwrap();
    let out = bench(&["validate-paper", "--table", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("INCONSISTENT"));
}

#[test]
fn run_writes_report_and_fit_reads_it_back() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = bench(&[
        "sweep", "--global", "4x4x4x8", "--grids", "1x1x1x1,1x1x1x2,1x1x2x2", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);

    let out = bench(&["fit-model", "--rows", csv.to_str().unwrap(), "--iters", "30"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("r="));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "global = 4x4x4x8\nformat = md\nmax_iter = 2\n").unwrap();
    // The file alone caps the solve below convergence.
    let out = bench(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = bench(&["run", "--config", cfg.to_str().unwrap(), "--max-iter", "500"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("| # Ranks"));
}

#[test]
fn json_output_and_timeout_flag() {
    let out = bench(&["run", "--global", "4x4x4x8", "--grid", "1x1x1x2", "--format", "json", "--timeout-s", "60"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["ranks"], 2);
    assert_eq!(bench(&["run", "--timeout-s", "0"]).status.code(), Some(1));
}

#[test]
fn predict_and_fit_reference_rows() {
    let out = bench(&[
        "predict", "--model", "r=1e9,alpha=1e-6,beta=1e-9", "--global", "16x16x16x32", "--grid", "1x1x2x2", "--iters", "100",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let line = stdout(&out).lines().nth(1).unwrap().to_owned();
    let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
    assert!(vals[0] > 0.0 && vals[1] > 0.0 && vals[1] <= 1.0);
    assert_eq!(bench(&["predict", "--model", "r=-1,alpha=0,beta=0", "--global", "8x8x8x8", "--grid", "1x1x1x1", "--iters", "1"]).status.code(), Some(1));

    let out = bench(&["fit-model", "--rows", &data("table2.csv"), "--iters", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 5);
}
