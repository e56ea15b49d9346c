use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lrlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("LRLAB_CONFIG")
        .env_remove("LRLAB_TOLERANCE")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const SMALL_CHAIN: &str = r#""system": {
    "lattice": {"kind": "chain", "length": 6},
    "interval": [0, 1],
    "model": {"name": "uniform_tfim", "j": 1, "h": 1}
  }"#;

#[test]
fn verify_algebra_with_defaults_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lrlab(&["verify-algebra", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&tmp.path().join("res"));
    assert_eq!(s["passed"], true);
    let names: Vec<&str> = s["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in ["defining_property", "module_property", "composition", "contraction", "car_relations"] {
        assert!(names.contains(&want), "{want} missing");
    }
    let csv = fs::read_to_string(tmp.path().join("res/checks.csv")).unwrap();
    assert!(csv.starts_with("name,passed,value\n"));
}

#[test]
fn zero_chain_cone_is_all_zero() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "zero.json",
        r#"{"system": {"lattice": {"kind": "chain", "length": 5}, "interval": [0, 1], "model": {"name": "zero"}},
            "cone": {"times": {"linspace": [0, 1, 4]}}}"#,
    );
    let out = lrlab(&["cone", "--config", "zero.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("res/cone.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,r,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 * 2);
    assert!(rows.iter().all(|r| r.ends_with(",0.0000000000e0")));
}

#[test]
fn cauchy_beyond_short_time_window_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "c.json",
        &format!(
            r#"{{{SMALL_CHAIN}, "cauchy": {{"t": 5.0, "k_list": [2, 4, 6, 8], "nu": 1, "tau": {{"c_lr": {{"value": 1.0}}}}}}}}"#
        ),
    );
    let out = lrlab(&["cauchy", "--config", "c.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("short-time window"));
}

#[test]
fn schema_errors_are_line_anchored() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.json", "{\n  \"system\": null,\n  \"tolerence\": 1e-8\n}\n");
    let out = lrlab(&["verify-algebra", "--config", "bad.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("tolerence"));
}

#[test]
fn foreign_sections_and_formats_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "r.json",
        &format!(r#"{{{SMALL_CHAIN}, "radius": {{"times": {{"linspace": [0, 1, 3]}}}}}}"#),
    );
    let out = lrlab(&["cone", "--config", "r.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radius"));

    write(
        tmp.path(),
        "f.json",
        &format!(r#"{{{SMALL_CHAIN}, "formats": ["png"], "radius": {{"times": {{"linspace": [0, 1, 3]}}}}}}"#),
    );
    let out = lrlab(&["radius", "--config", "f.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_time_grid_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "e.json", &format!(r#"{{{SMALL_CHAIN}, "cone": {{"times": {{"values": []}}}}}}"#));
    let out = lrlab(&["cone", "--config", "e.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(tmp.path().join("res/cone.csv")).unwrap(), "t,r,value\n");
}

#[test]
fn growth_emits_ln_norm_plot_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "g.json",
        &format!(r#"{{{SMALL_CHAIN}, "refine": true, "growth": {{"times": {{"linspace": [0, 0.3, 7]}}, "nu": 1}}}}"#),
    );
    let out = lrlab(&["growth", "--config", "g.json", "--out", "res", "--threads", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let res = tmp.path().join("res");
    let svg = fs::read_to_string(res.join("growth.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("ln ‖α A‖_ν"));
    let csv = fs::read_to_string(res.join("growth.csv")).unwrap();
    assert!(csv.starts_with("t,k,value\n"));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(res.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 2);
    let files = manifest["files"].as_array().unwrap();
    for name in ["growth.csv", "growth.svg", "summary.json"] {
        assert!(files.iter().any(|f| f["path"] == name), "{name} not listed");
    }
    assert!(manifest["integrator"]["scan"]["k"].is_number());
    let s = summary(&res);
    assert!(s["checks"].as_array().unwrap().iter().any(|c| c["name"] == "refine_shift"));
}

#[test]
fn nu_outside_window_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "g.json",
        &format!(r#"{{{SMALL_CHAIN}, "growth": {{"times": {{"linspace": [0, 0.3, 7]}}, "nu": 4}}}}"#),
    );
    let out = lrlab(&["growth", "--config", "g.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn environment_overrides_mirror_flags() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "r.json",
        &format!(r#"{{{SMALL_CHAIN}, "radius": {{"times": {{"linspace": [0, 0.5, 3]}}}}}}"#),
    );
    let out = Command::new(env!("CARGO_BIN_EXE_lrlab"))
        .args(["radius", "--out", "res"])
        .current_dir(tmp.path())
        .env("LRLAB_CONFIG", "r.json")
        .env("LRLAB_TOLERANCE", "1e-9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("res/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["integrator"]["tolerance"], 1e-9);
}

#[test]
fn fermion_cone_with_number_probe() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "f.json",
        r#"{"system": {
              "lattice": {"kind": "chain", "length": 4},
              "backend": {"kind": "fermion", "flavors": 1},
              "x0": 0,
              "interval": [0, 1],
              "model": {"name": "terms", "terms": [
                  {"site": 0, "op": "c+0 c1", "add_adjoint": true},
                  {"site": 1, "op": "c+1 c2", "add_adjoint": true},
                  {"site": 2, "op": "c+2 c3", "add_adjoint": true},
                  {"site": 3, "op": "n3", "coefficient": {"kind": "constant", "value": 0.5}}]},
              "observable": "n0"},
            "cone": {"times": {"linspace": [0, 1, 5]}, "probe": "n"}}"#,
    );
    let out = lrlab(&["cone", "--config", "f.json", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("res"));
    let radii = s["radii"].as_array().unwrap();
    assert_eq!(radii[0]["r"], 0.0);
    assert!(radii.last().unwrap()["r"].as_f64().unwrap() >= 1.0);

    write(tmp.path(), "odd.json", &fs::read_to_string(tmp.path().join("f.json")).unwrap().replace(r#""probe": "n""#, r#""probe": "c""#));
    let out = lrlab(&["cone", "--config", "odd.json", "--out", "res2"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
