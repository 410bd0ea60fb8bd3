use std::path::Path;
use std::process::{Command, Output};

use aemlab_core::scenario::{ReferenceCase, ScenarioConfig};

fn aemlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aemlab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn mesh_gen_writes_a_mesh_and_prints_stats() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("disk.txt");
    let out = aemlab(&["mesh-gen", "--refinement", "2", "--out", mesh.to_str().unwrap()]);
    assert!(out.status.success());
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["triangles"], 6 * 16);
    assert!(std::fs::metadata(&mesh).unwrap().len() > 0);
}

#[test]
fn trace_suite_passes() {
    let out = aemlab(&["validate", "traces", "--refinement", "4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn pipeline_writes_parseable_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &ScenarioConfig::reference(ReferenceCase::II4, 3));
    let out_dir = dir.path().join("run");
    let out = aemlab(&["pipeline", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--serial"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report["errors"]["j"].as_f64().unwrap() < 0.5);
    for name in ["traces.csv", "internal.csv", "j_rec.csv"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
}

#[test]
fn staged_reconstruction_reads_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &ScenarioConfig::reference(ReferenceCase::II4, 2));
    let data = dir.path().join("data");
    let rec = dir.path().join("rec");
    assert!(aemlab(&["internal", "--config", &cfg, "--out", data.to_str().unwrap()]).status.success());
    let out = aemlab(&["reconstruct", "--config", &cfg, "--input", data.to_str().unwrap(), "--out", rec.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(rec.join("reconstruction.json").exists());
}

#[test]
fn source_touching_the_boundary_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::reference(ReferenceCase::II4, 2);
    cfg.source.bumps[0].radius = 0.8;
    let path = write_config(dir.path(), &cfg);
    let out = aemlab(&["pipeline", "--config", &path, "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn non_unique_case_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::reference(ReferenceCase::II4, 2);
    cfg.medium.gammas.eps = cfg.medium.gammas.j;
    cfg.medium.gammas.sigma = cfg.medium.gammas.j;
    let path = write_config(dir.path(), &cfg);
    let out = aemlab(&["pipeline", "--config", &path, "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_config_is_an_io_error() {
    let out = aemlab(&["forward", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
}
