use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_holonomy-lab");

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("HOLONOMY_LAB_OUT")
        .output()
        .unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let idx = r.headers().unwrap().iter().position(|c| c == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

const SPECTRUM_CFG: &str = r#"
[spectrum]
cases = [[1, 16]]
presets = ["uniform"]
tau2 = [1.0]
count = 4
"#;

#[test]
fn spectrum_suite_writes_lowest_levels() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SPECTRUM_CFG).unwrap();
    let out = run(&["--config", "exp.toml", "--suite", "spectrum", "--out", "rep"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rep/spectrum.csv")).unwrap();
    let got: Vec<f64> = column(&csv, "eigenvalue").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(got.len(), 4);
    for (g, w) in got.iter().zip([0.0, 2.0, 2.0, 4.0]) {
        assert!((g - w).abs() < 1e-8, "{got:?}");
    }
    let halved: Vec<f64> = column(&csv, "eigenvalue_c_over_sqrt2").iter().map(|s| s.parse().unwrap()).collect();
    for (h, g) in halved.iter().zip(&got) {
        assert_eq!(*h, 0.5 * g);
    }
    assert!(dir.path().join("rep/summary.json").exists());
    assert!(dir.path().join("rep/spectrum_checks.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"), "{stdout}");
}

#[test]
fn ccr_without_phase_has_zero_residual() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "[lattice]\nsites_per_axis = 4\n[ccr]\nomegas = [0.0]\ncutoff = 8\nbasis_size = 40\n",
    )
    .unwrap();
    let out = run(&["--config", "exp.toml", "--suite", "ccr", "--out", "rep"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let checks = std::fs::read_to_string(dir.path().join("rep/ccr_checks.csv")).unwrap();
    let ops = column(&checks, "operation");
    let res = column(&checks, "residual");
    let zero = ops.iter().position(|o| o == "weyl_zero_shift").unwrap();
    assert_eq!(res[zero].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn unknown_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[lattice]\nsites_per_axes = 4\n").unwrap();
    let out = run(&["--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sites_per_axes"), "{err}");
}

#[test]
fn invalid_value_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[sobolev]\ntau1 = -1.0\n").unwrap();
    let out = run(&["--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau1"));
}

#[test]
fn environment_sets_report_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SPECTRUM_CFG).unwrap();
    let out = Command::new(BIN)
        .args(["--config", "exp.toml", "--suite", "spectrum"])
        .current_dir(dir.path())
        .env("HOLONOMY_LAB_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/spectrum.csv").exists());
    assert!(!dir.path().join("report").exists());
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--print-config"], dir.path());
    assert!(out.status.success());
    std::fs::write(dir.path().join("echo.toml"), &out.stdout).unwrap();
    let again = run(&["--config", "echo.toml", "--print-config"], dir.path());
    assert_eq!(out.stdout, again.stdout);
}
