use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ocpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocpa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn ehm_check_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ehm");
    let res = ocpa(&["--preset", "ehm-check", "--out", out.to_str().unwrap()]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let csv = fs::read_to_string(out.join("ehm.csv")).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("m,b,h,quadrature,closed_form,residual"));
    let residuals: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(residuals.len(), 3);
    assert!(residuals.iter().all(|r| *r < 1e-6));

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for key in ["config", "results", "pass", "timings", "version"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["pass"]["all"], Value::Bool(true));
    assert_eq!(summary["config"]["experiment"], "ehm-check");
}

#[test]
fn kernel_check_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let res = ocpa(&[
        "--preset",
        "kernel-check",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    for name in ["symmetry", "mass", "semigroup"] {
        assert!(csv.contains(name), "{csv}");
    }
}

#[test]
fn unstable_simulation_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"simulate\"\nreplications = 2\n\n[grid]\nn-space = 64\nn-time = 100\nhorizon = 1.0\n",
    );
    let res = ocpa(&["--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 6"), "{err}");
    assert!(err.contains("dx^2/2"), "{err}");
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn unknown_key_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"ehm-check\"\nreplicates = 3\n");
    let res = ocpa(&["--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(
        err.contains("line 2") && err.contains("replicates"),
        "{err}"
    );
}

#[test]
fn missing_config_file_exits_4() {
    let res = ocpa(&["--config", "/nonexistent/ocpa.toml"]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn simulate_dumps_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"simulate\"\nseed = 5\nreplications = 3\ncoefficients = \"mixing\"\ndimension = 2\n\
         [grid]\nn-space = 16\ncourant = 0.25\nhorizon = 0.02\n[simulate]\ndump = \"csv\"\ndump-count = 2\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let res = ocpa(&[
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(a.join("trajectory_0000.csv").exists());
    assert!(a.join("trajectory_0001.csv").exists());
    assert!(a.join("simulate.json").exists());

    let res = ocpa(&[
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "6",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let sa: Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let sb: Value =
        serde_json::from_str(&fs::read_to_string(b.join("summary.json")).unwrap()).unwrap();
    assert_eq!(sa["config"]["seed"], 5);
    assert_eq!(sb["config"]["seed"], 6);
    assert_ne!(
        fs::read(a.join("trajectory_0000.csv")).unwrap(),
        fs::read(b.join("trajectory_0000.csv")).unwrap()
    );
}

#[test]
fn lists_presets() {
    let res = ocpa(&["--list-presets"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.lines().any(|l| l == "holder-path"));
}
