//! End-to-end checks of the external surfaces: the CLI subcommands, the
//! plain-text mesh snapshot format, and the study CSV layout.

use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
[geometry]
ell = 2.0
height = 1.0
eps = 0.25
width = "vanishing"

[geometry.cell]
a1 = -0.5
b1 = 0.5
a2 = 0.25
b2 = 0.75

[scalings]
alpha = -1.0
beta = 1.0
gamma = 1.0
xi = 0.5

[coefficients]
d_l = [1.0, 1.0]
d_r = [0.5, 0.5]
d_m = [1.0, 1.0]
b_l = [0.0, 0.0]
b_r = [0.0, 0.0]
b_m = [0.0, 0.0]

[sources]
u_left = "constant:1.0"
u_right = "zero"

[drift]
coeffs = [0.0, 1.0, -1.0]
delta = 0.1

[time]
t_end = 0.05
dt = 0.025

[mesh]
edge = 0.05
cell_edge = 0.1
n_sigma = 4
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lamella"))
}

fn setup(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    cfg
}

/// Parses the mesh snapshot header and record counts.
fn check_snapshot(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let nv: usize = lines
        .next()
        .unwrap()
        .strip_prefix("vertices ")
        .unwrap()
        .parse()
        .unwrap();
    let nt: usize = lines
        .next()
        .unwrap()
        .strip_prefix("triangles ")
        .unwrap()
        .parse()
        .unwrap();
    let ne: usize = lines
        .next()
        .unwrap()
        .strip_prefix("edges ")
        .unwrap()
        .parse()
        .unwrap();
    let records: Vec<&str> = lines.collect();
    assert_eq!(records.len(), nv + nt + ne, "snapshot record count");
    // vertex records are two floats
    let first: Vec<&str> = records[0].split_whitespace().collect();
    assert_eq!(first.len(), 2);
    first.iter().for_each(|f| {
        f.parse::<f64>().unwrap();
    });
    // triangle records carry three indices and a region
    let tri: Vec<&str> = records[nv].split_whitespace().collect();
    assert_eq!(tri.len(), 4);
    // edge records carry two indices and a tag name
    let edge: Vec<&str> = records[nv + nt].split_whitespace().collect();
    assert_eq!(edge.len(), 3);
}

#[test]
fn validate_config_reports_classification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = bin()
        .args(["validate-config", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("classification: S1"));
    assert!(stdout.contains("all rules satisfied"));
}

#[test]
fn run_micro_writes_snapshots_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out_dir = dir.path().join("micro");
    let out = bin()
        .args(["run-micro", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    check_snapshot(&out_dir.join("mesh.txt"));
    for name in [
        "tag_stats.csv",
        "field_0000.csv",
        "field_0002.csv",
        "energies.csv",
        "solver_diag.csv",
        "run_meta.txt",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let energies = fs::read_to_string(out_dir.join("energies.csv")).unwrap();
    assert!(energies.starts_with("e1,e2,e3,e4\n"));
    let field = fs::read_to_string(out_dir.join("field_0000.csv")).unwrap();
    assert!(field.starts_with("node,x,y,v,u\n"));
}

#[test]
fn run_macro_s1_writes_flux_balance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out_dir = dir.path().join("macro");
    let out = bin()
        .args(["run-macro", "--choice", "s1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    check_snapshot(&out_dir.join("bulk_l_mesh.txt"));
    check_snapshot(&out_dir.join("cell_mesh.txt"));
    let balance = fs::read_to_string(out_dir.join("flux_balance.csv")).unwrap();
    assert!(balance.starts_with("step,time,sweeps,matching_residual,flux_residual\n"));
    assert!(balance.lines().count() >= 3);
}

#[test]
fn study_eps_report_has_documented_columns_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out_dir = dir.path().join("eps");
    let out = bin()
        .args(["study-eps", "--eps", "0.5,0.25,0.125", "--choice", "s1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_value,err_L,err_R,err_layer_avg,e1,e2,e3"
    );
    assert_eq!(lines.count(), 3);
    assert!(out_dir.join("timing.csv").exists());
    assert!(fs::read_to_string(out_dir.join("report.svg"))
        .unwrap()
        .starts_with("<svg"));

    // the plot subcommand consumes the report
    let svg_path = dir.path().join("replot.svg");
    let out = bin()
        .args(["plot", "--y", "err_L,err_layer_avg", "--csv"])
        .arg(out_dir.join("report.csv"))
        .arg("--out")
        .arg(&svg_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(fs::read_to_string(&svg_path).unwrap().contains("polyline"));
}

#[test]
fn study_delta_runs_at_micro_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out_dir = dir.path().join("delta");
    let out = bin()
        .args([
            "study-delta",
            "--deltas",
            "0.2,0.1,0",
            "--level",
            "micro",
            "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3); // header + two positive deltas
}

#[test]
fn invalid_subcommand_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = bin()
        .args(["study-eps", "--eps", "0.25", "--choice", "s1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep too short"));
}
