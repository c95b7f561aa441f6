use std::path::Path;
use std::process::{Command, Output};

use hybrid_ris_uav::config::SystemConfig;

fn hris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hris")).args(args).output().expect("spawn hris")
}

fn small() -> SystemConfig {
    SystemConfig {
        slots: 10,
        ..SystemConfig::desk()
    }
}

fn write_config(dir: &Path, cfg: &SystemConfig) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, cfg.to_json()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_static_writes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small());
    let out = tmp.path().join("o");
    let r = hris(&["run-static", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iteration,tau_nats,block,status,residual,wall_ms"));
    assert!(lines.count() >= 1);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["ratesNats"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_config_fails() {
    let r = hris(&["run-static", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn zero_ues_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.json");
    std::fs::write(&p, r#"{"numUes": 0}"#).unwrap();
    let r = hris(&["run-mobile", "--config", p.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("numUes"));
}

#[test]
fn trajectory_dump_is_closed_and_speed_feasible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small();
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("m");
    let r = hris(&["run-mobile", "--config", &path, "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let mut rd = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["t", "x", "y", "z", "scheduledUe"]);
    let pts: Vec<[f64; 3]> = rd
        .records()
        .map(|r| {
            let r = r.unwrap();
            [r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap()]
        })
        .collect();
    assert_eq!(pts.len(), cfg.slots);
    assert_eq!(pts[0], pts[cfg.slots - 1]);
    for w in pts.windows(2) {
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        assert!(d <= cfg.d_max_m() * (1.0 + 1e-6));
    }
    assert!(out.join("ris_profile.csv").exists());
    assert!(out.join("schedule.csv").exists());
}

#[test]
fn sweep_cardinality_and_empty_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "base": small(),
        "axis": {"name": "ptMaxDbm", "values": [20.0]},
        "schemes": ["noRis", "passive", "hybrid"],
        "seeds": [1, 2],
        "mode": "static"
    });
    let p = tmp.path().join("spec.json");
    std::fs::write(&p, spec.to_string()).unwrap();
    let out = tmp.path().join("s");
    let r = hris(&["sweep", "--config", p.to_str().unwrap(), "--jobs", "2", "--out", out.to_str().unwrap(), "--gnuplot-script"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = csv::Reader::from_path(out.join("results.csv")).unwrap().records().count();
    assert_eq!(rows, 6);
    assert!(out.join("plot.gp").exists());

    let mut bad = spec.clone();
    bad["seeds"] = serde_json::json!([]);
    std::fs::write(&p, bad.to_string()).unwrap();
    let r = hris(&["sweep", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("seeds"));
}

#[test]
fn verify_runs_only_the_selected_suite() {
    let r = hris(&["verify", "--suite", "power-closed-form"]);
    assert_eq!(r.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let suites = report["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 1);
    assert_eq!(suites[0]["suite"], "power-closed-form");
    assert_eq!(report["passed"], true);
}

#[test]
fn bisection_mode_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SystemConfig {
        slots: 4,
        max_iters: 3,
        ..SystemConfig::desk()
    };
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("b");
    let r = hris(&["run-static", "--config", &path, "--solver-mode", "bisection", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
}
