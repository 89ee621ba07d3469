use std::path::Path;
use std::process::{Command, Output};

use lsp_core::io::{
    read_beck_csv, read_csv, BackwardRow, ConeCsvRow, CurveRow, OrbitRow, PlanRow, PortraitCsvRow, SweepCsvRow,
};

fn lsp(args: &[&str]) -> Output {
    lsp_with_config(args, None)
}

fn lsp_with_config(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lsp"));
    cmd.args(args).env_remove("LSP_CONFIG");
    if let Some(p) = config {
        cmd.env("LSP_CONFIG", p);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = lsp(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn optimize_reports_right_candidate() {
    let v: serde_json::Value = serde_json::from_slice(&ok(&["optimize", "--dist", "exp"])).unwrap();
    let chosen = v["chosen"].as_u64().unwrap() as usize;
    let best = &v["candidates"][chosen];
    assert!((best["x1"].as_f64().unwrap() - 0.7465).abs() < 5e-4);
    assert!((best["cost"].as_f64().unwrap() - 2.3645).abs() < 1e-3);
    assert!(best["trunc"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["dist"], "exp");
    assert_eq!(v["bounds"][0].as_f64().unwrap(), 1.0);
}

#[test]
fn pareto_sweep_is_twice_x1() {
    let bytes = ok(&["sweep", "--dist", "pareto:2", "--range", "2,4", "--points", "10"]);
    let rows: Vec<SweepCsvRow> = read_csv(&bytes[..]).unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert!((r.en - 2.0 * r.x1).abs() <= 1e-8, "{r:?}");
    }
}

#[test]
fn separatrix_is_byte_identical_across_runs() {
    let a = ok(&["separatrix", "--dist", "exp", "--tol", "1e-10"]);
    let b = ok(&["separatrix", "--dist", "exp", "--tol", "1e-10"]);
    assert_eq!(a, b);
    let rows: Vec<CurveRow> = read_csv(&a[..]).unwrap();
    assert_eq!(rows.len(), 2000);
    assert!(rows[0].residual.is_nan());
    assert!(rows.iter().filter(|r| r.y >= 13.0).all(|r| r.residual <= 1e-8));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let args = ["simulate", "--dist", "exp", "--samples", "20000", "--seed", "3"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let other = ok(&["simulate", "--dist", "exp", "--samples", "20000", "--seed", "4"]);
    assert_ne!(a, other);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let (mean, se) = (v["mean"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((mean - v["expected"].as_f64().unwrap()).abs() <= 5.0 * se);
}

#[test]
fn every_csv_parses_back() {
    let rows: Vec<PortraitCsvRow> = read_csv(&ok(&["portrait", "--points", "30"])[..]).unwrap();
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().any(|r| r.label == "chaotic" && r.break_step.is_some()));
    let rows: Vec<ConeCsvRow> =
        read_csv(&ok(&["portrait", "--cone", "--range", "0.1,2", "--points", "4"])[..]).unwrap();
    assert_eq!(rows.len(), 20);
    let rows: Vec<OrbitRow> = read_csv(&ok(&["portrait", "--x1", "0.5"])[..]).unwrap();
    assert_eq!(rows.last().unwrap().flag, "break");
    let rows: Vec<BackwardRow> = read_csv(&ok(&["separatrix", "--steps", "3", "--grid", "500"])[..]).unwrap();
    assert!(rows.iter().any(|r| r.step == 3));
    let rows: Vec<PlanRow> = read_csv(&ok(&["optimize", "--format", "csv"])[..]).unwrap();
    assert!((rows[0].x_k - 0.7465).abs() < 5e-4);
    let rows = read_beck_csv(&ok(&["beck-iterate", "--range", "0.5,1", "--points", "3", "--steps", "5"])[..]).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].1.len(), 6);
    // escaping seeds end early instead of failing the run
    let rows = read_beck_csv(&ok(&["beck-iterate"])[..]).unwrap();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().any(|r| r.1.len() < 7));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let stdout = ok(&["sweep", "--points", "5"]);
    ok(&["sweep", "--points", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
}

#[test]
fn config_file_is_merged_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"dist": "pareto:2", "range": [2, 3], "points": 3}"#).unwrap();
    let out = lsp_with_config(&["sweep", "--points", "5"], Some(&path));
    assert!(out.status.success());
    let rows: Vec<SweepCsvRow> = read_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4].x1, 3.0);
}

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let first = ok(&[
        "portrait",
        "--range",
        "0.2,0.4",
        "--tol",
        "1e-12",
        "--format",
        "json",
        "--print-config",
    ]);
    std::fs::write(&path, &first).unwrap();
    let again = lsp_with_config(&["portrait", "--print-config"], Some(&path));
    assert!(again.status.success());
    assert_eq!(again.stdout, first);
}

#[test]
fn exit_codes() {
    let bad_range = lsp(&["sweep", "--range", "3,1"]);
    assert_eq!(bad_range.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_range.stderr).contains("range"));
    assert_eq!(lsp(&["sweep", "--dist", "weibull"]).status.code(), Some(2));
    assert_eq!(lsp(&["sweep", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, "{not json").unwrap();
    assert_eq!(lsp_with_config(&["sweep"], Some(&path)).status.code(), Some(2));
    let module = lsp(&["separatrix", "--dist", "pareto:2"]);
    assert_eq!(module.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&module.stderr).contains("compute_separatrix"));
    let module = lsp(&["optimize", "--range", "0.8,1.5"]);
    assert_eq!(module.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&module.stderr).contains("boundary_candidates"));
}

#[test]
fn validate_prints_one_line_per_criterion() {
    let out = lsp(&["validate"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let verdicts: Vec<&str> = text.lines().filter(|l| l.starts_with('[')).collect();
    assert_eq!(verdicts.len(), 14, "{text}");
    let all_pass = verdicts.iter().all(|l| l.starts_with("[PASS]"));
    assert_eq!(out.status.success(), all_pass);
}
