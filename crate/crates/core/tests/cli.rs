use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use pmelab::cli::{run, Cli};
use pmelab::harness::CheckReport;
use pmelab::Error;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("pmelab").chain(args.iter().copied())).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

fn read_reports(dir: &Path) -> Vec<CheckReport> {
    serde_json::from_str(&fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap()
}

#[test]
fn default_verify_passes_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert_eq!(run(&cli(&["verify", "--out", &out, "--grid", "201"])).unwrap(), 0);
    let reports = read_reports(dir.path());
    let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["ab_time", "gradient_bound", "mass", "persistence", "propagation"]);
    assert!(reports.iter().all(|r| r.pass));
    for name in names {
        let table = fs::read_to_string(dir.path().join("tables").join(format!("{name}.tsv"))).unwrap();
        assert!(table.starts_with("t\tstatistic\tbound\tmargin\n"));
    }
}

#[test]
fn verify_output_is_byte_stable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = out_arg(d.path());
        run(&cli(&["verify", "--out", &out, "--grid", "101", "--checks", "mass,holder", "--seed", "7"])).unwrap();
    }
    let x = fs::read(a.path().join("reports.json")).unwrap();
    assert_eq!(x, fs::read(b.path().join("reports.json")).unwrap());
}

#[test]
fn controls_fail_as_expected() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let config = configs().join("controls.toml");
    let status = run(&cli(&["verify", "--config", config.to_str().unwrap(), "--out", &out])).unwrap();
    assert_eq!(status, 0);
    let reports = read_reports(dir.path());
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.is_control() && !r.pass));
}

#[test]
fn failing_check_sets_exit_status() {
    // the pressure identity is violated by the discrete front, see the README
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let status = run(&cli(&["verify", "--out", &out, "--checks", "ab_pressure"])).unwrap();
    assert_eq!(status, 1);
    assert!(!read_reports(dir.path())[0].pass);
}

#[test]
fn simulate_writes_snapshots_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    run(&cli(&["simulate", "--out", &out, "--t", "1,1.5,2", "--grid", "101"])).unwrap();
    let snaps: Vec<_> = fs::read_dir(dir.path().join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 3);
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["times"], serde_json::json!([1.0, 1.5, 2.0]));
    assert!(diag["diagnostics"]["max_relative_mass_drift"].as_f64().unwrap() < 1e-12);
}

#[test]
fn eta_sequence_runs_continuation() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    run(&cli(&["simulate", "--out", &out, "--grid", "101", "--eta", "1e-2,1e-3,1e-4"])).unwrap();
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    let diffs = diag["eta_differences"].as_array().unwrap();
    assert_eq!(diffs.len(), 2);
    assert!(diffs[1].as_f64().unwrap() < diffs[0].as_f64().unwrap());
}

#[test]
fn barenblatt_table_reports_radius_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    run(&cli(&["barenblatt", "--out", &out, "--mass", "1", "--t", "1,8,64", "--grid", "101"])).unwrap();
    let text = fs::read_to_string(dir.path().join("barenblatt.tsv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((r[1] - 2.080_083_8 * r[0].cbrt()).abs() < 1e-6 * r[1]);
        assert!((r[3] - 2.620_741_4).abs() < 1e-6);
    }
    assert_eq!(fs::read_dir(dir.path().join("profiles")).unwrap().count(), 3);
}

#[test]
fn mass_override_needs_barenblatt_data() {
    let config = configs().join("heat.toml");
    let err = run(&cli(&["simulate", "--config", config.to_str().unwrap(), "--mass", "1"])).unwrap_err();
    assert!(matches!(err, Error::Config { ref field, .. } if field == "--mass"), "{err}");
}

#[test]
fn unknown_check_is_a_config_error() {
    let err = run(&cli(&["verify", "--checks", "mass,nope"])).unwrap_err();
    assert!(matches!(err, Error::Config { ref field, .. } if field == "checks"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = pmelab::config::RunConfig::load(&path).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn binary_reports_config_errors_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "m = 2.0\nn = 1\nbogus = 3\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_pmelab"))
        .args(["verify", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
}

#[test]
fn binary_exit_status_follows_checks() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_pmelab"))
        .args(["verify", "--grid", "101", "--checks", "mass", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).starts_with("PASS"));
}
