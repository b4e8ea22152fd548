use std::path::Path;
use std::process::{Command, Output};

use isac_core::channel::SystemParams;
use isac_core::optimizer::{DesignSolution, Scenario};
use serde_json::{json, Value};

fn isac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn defaults() -> Value {
    serde_json::to_value(SystemParams::default()).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn design_meets_the_rate_floor_and_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", &defaults());
    let out = dir.path().join("design.json");
    let o = isac(&["design", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sol: DesignSolution = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(sol.feasible);
    assert!(sol.rate >= 2.0 - 1e-8);
    let sc = Scenario::from_params(&SystemParams::default()).unwrap();
    assert!(sc.check(&sol).unwrap().passed);
    let e = isac(&["detect-eval", "--config", &cfg, "--design", out.to_str().unwrap()]);
    assert!(e.status.success());
    assert!(String::from_utf8(e.stdout).unwrap().starts_with("pfa,threshold,pd_mean_gain,pd_average\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut missing = defaults();
    missing.as_object_mut().unwrap().remove("t_coherence");
    let o = isac(&["design", "--config", &write(dir.path(), "a.json", &missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_coherence"));

    let mut unknown = defaults();
    unknown["rate_floor"] = json!(1.0);
    let o = isac(&["design", "--config", &write(dir.path(), "b.json", &unknown)]);
    assert_eq!(o.status.code(), Some(2));

    let mut bad = defaults();
    bad["corr_coeff"] = json!(1.5);
    let o = isac(&["design", "--config", &write(dir.path(), "c.json", &bad)]);
    assert_eq!(o.status.code(), Some(2));

    let mut hard = defaults();
    hard["rate_min"] = json!(1000.0);
    let o = isac(&["design", "--config", &write(dir.path(), "d.json", &hard)]);
    assert_eq!(o.status.code(), Some(3));

    let o = isac(&["design", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn region_csv_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = defaults();
    v["t_coherence"] = json!(8);
    v["n_tx"] = json!(6);
    v["region"] = json!({"n_points": 6, "lengths": [2, 5]});
    let cfg = write(dir.path(), "r.json", &v);
    let one = isac(&["region", "mse-mi", "--config", &cfg, "--threads", "1"]);
    let four = isac(&["region", "mse-mi", "--config", &cfg, "--threads", "4"]);
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sweep_param,axis_x,axis_y,L,p_t,feasible"));
    assert_eq!(lines.count(), 12);

    let a = isac(&["region", "rate-mi", "--config", &cfg, "--threads", "1"]);
    let b = isac(&["region", "rate-mi", "--config", &cfg, "--threads", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validations_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = defaults();
    v["n_tx"] = json!(4);
    v["t_coherence"] = json!(6);
    v["detection"] = json!({"trials": 20000, "L": 2});
    v["estimation"] = json!({"trials": 2000, "L": 2});
    let cfg = write(dir.path(), "v.json", &v);
    let a = isac(&["validate", "detect", "--config", &cfg, "--seed", "9", "--format", "csv"]);
    let b = isac(&["validate", "detect", "--config", &cfg, "--seed", "9", "--format", "csv", "--threads", "2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = isac(&["validate", "detect", "--config", &cfg, "--seed", "10", "--format", "csv"]);
    assert_ne!(a.stdout, c.stdout);
    let e = isac(&["validate", "estimate", "--config", &cfg]);
    assert!(e.status.success());
    let rep: Value = serde_json::from_slice(&e.stdout).unwrap();
    assert!(rep["pass"].is_boolean());
    assert_eq!(rep["cases"].as_array().unwrap().len(), 4);
}

#[test]
fn compare_pilots_lists_every_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = defaults();
    v["n_tx"] = json!(6);
    v["t_coherence"] = json!(8);
    v["compare"] = json!({"L": 4, "draws": 20, "n_points": 5});
    let cfg = write(dir.path(), "p.json", &v);
    let o = isac(&["compare-pilots", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for series in ["upa,", "epa,", "dft,", "gaussian,"] {
        assert!(text.lines().any(|l| l.starts_with(series)), "{series} missing");
    }
    let o = isac(&["compare-pilots", "--config", &cfg, "--format", "json"]);
    let table: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(table["L"], json!(4));
}
