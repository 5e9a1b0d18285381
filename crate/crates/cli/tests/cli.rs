use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gmatern(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmatern"))
        .args(args)
        .env_remove("GMATERN_OUT")
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn checksums(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["path"].as_str().unwrap().to_string(), a["sha256"].as_str().unwrap().to_string()))
        .collect()
}

const POISSON: &str = r#"
seed = 11

[job]
command = "simulate-lgcp"
upper = [5.0, 5.0]
cells = 5
replicates = 2

[job.source]
lambda = 3.0
"#;

#[test]
fn minimal_poisson_config_writes_pattern_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, POISSON).unwrap();
    let out = tmp.path().join("out");
    let o = gmatern(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("pattern_000.csv").exists() && out.join("pattern_001.json").exists());
    let m = manifest(&out);
    assert_eq!(m["command"], "simulate-lgcp");
    assert_eq!(m["config"]["seed"], 11);
    // defaults are echoed
    assert_eq!(m["config"]["job"]["lower"], serde_json::json!([0.0, 0.0]));
    assert_eq!(m["config"]["job"]["source"]["family"], "exponential");
    assert_eq!(checksums(&out).len(), 8);
}

#[test]
fn rerun_gives_identical_checksums_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, POISSON.replace("lambda = 3.0", "variance = 0.5\nrange = 1.5")).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(gmatern(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--threads", "1"]).status.success());
    assert!(gmatern(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "3"]).status.success());
    assert_eq!(checksums(&a), checksums(&b));
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn invalid_preset_is_a_config_error_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    assert!(gmatern(&["simulate-lgcp", "--lambda", "2", "--upper", "4,4", "--cells", "4", "--out", sim.to_str().unwrap()])
        .status
        .success());
    let out = tmp.path().join("thin");
    let o = gmatern(&[
        "thin",
        "--input",
        sim.join("pattern_000.csv").to_str().unwrap(),
        "--preset",
        "strauss",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(!out.exists());

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\n[job]\ncommand = \"simulate-lgcp\"\ncels = 3\n").unwrap();
    let o = gmatern(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gmatern(&["thin", "--input", "/nonexistent/p.csv", "--preset", "matern_i", "--radius", "0.5", "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn thin_then_estimate_then_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_str().unwrap().to_string();
    assert!(gmatern(&["simulate-lgcp", "--lambda", "2", "--upper", "6,6", "--cells", "3", "--replicates", "3", "--seed", "4", "--out", &p("sim")])
        .status
        .success());
    let o = gmatern(&[
        "thin", "--input", &p("sim/pattern_000.csv"), "--preset", "matern_ii", "--radius", "0.5", "--dilation", "0.5", "--out", &p("thin"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("thin/report.json")).unwrap()).unwrap();
    assert!(report["retained_count"].as_u64().unwrap() <= report["input_count"].as_u64().unwrap());

    let o = gmatern(&["estimate", "--input", &p("sim/pattern_*.csv"), "--statistic", "pcf", "--r-max", "1", "--n-bins", "4", "--out", &p("pcf")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gmatern(&["plot-data", &p("pcf/pcf.json"), "--out", &p("plot")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(tmp.path().join("plot/pcf_g.csv")).unwrap().lines().count(), 5);

    // field heatmap: one row per cell
    let o = gmatern(&["plot-data", &p("sim/field_000.csv"), "--out", &p("plot2")]);
    assert!(o.status.success());
    let heat = fs::read_to_string(tmp.path().join("plot2/field_000_heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 1 + 9);
    assert!(heat.starts_with("x1,x2,value\n"));
}

#[test]
fn plot_data_handles_empty_and_corrupt_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "x1,x2\n").unwrap();
    let out = tmp.path().join("o");
    assert!(gmatern(&["plot-data", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let points = fs::read_to_string(out.join("empty_points.csv")).unwrap();
    assert_eq!(points, "x1,x2\n");
    // the emitted table parses again
    assert!(gmatern(&["plot-data", out.join("empty_points.csv").to_str().unwrap(), "--out", tmp.path().join("o2").to_str().unwrap()])
        .status
        .success());

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "x1,x2,value\n0.5,0.5,1\n1.5,0.5,oops\n").unwrap();
    let o = gmatern(&["plot-data", bad.to_str().unwrap(), "--out", tmp.path().join("o3").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn intensity_closed_form_and_mc() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cf");
    let o = gmatern(&["intensity", "--mode", "closed-form", "--preset", "matern_ii", "--radius", "0.5", "--lambda", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("intensity.json")).unwrap()).unwrap();
    let b = std::f64::consts::PI * 0.25;
    assert!((v["value"].as_f64().unwrap() - (1.0 - (-2.0 * b).exp()) / b).abs() < 1e-12);

    let out = tmp.path().join("mc");
    let o = gmatern(&[
        "intensity", "--mode", "mc-first-order", "--preset", "matern_ii", "--radius", "0.5", "--lambda", "2", "--n-psi", "4", "--n-mark", "16",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("intensity.json")).unwrap()).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0086).abs() < 0.05, "{v}");
    for k in ["value", "std_error", "n_outer", "n_inner"] {
        assert!(v.get(k).is_some());
    }
}

#[test]
fn extremal_modes_run() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in ["m3", "matern-extremal", "visible-centres"] {
        let out = tmp.path().join(mode);
        let o = gmatern(&[
            "extremal", "--mode", mode, "--tau", "0.5", "--upper", "2,2", "--spacing", "0.25", "--lambda", "1", "--replicates", "2",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("surface_001.csv").exists() && out.join("report.json").exists());
    }
    let out = tmp.path().join("fidi");
    let o = gmatern(&[
        "extremal", "--mode", "fidi", "--tau", "0.5", "--upper", "1,1", "--spacing", "0.1", "--lambda", "1", "--replicates", "50",
        "--points", "0.25,0.5,0.75,0.5", "--thresholds", "1,2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let q = v["quadrature"].as_f64().unwrap();
    assert!(q > 0.0 && q < 1.0);
}
