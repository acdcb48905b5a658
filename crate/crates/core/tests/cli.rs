//! End-to-end checks of the command-line front end.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn twistshock(dir: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_twistshock"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kernels_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["kernels", "--eta-steps", "501"];
    assert_eq!(twistshock(a.path(), &args), 0);
    assert_eq!(twistshock(b.path(), &args), 0);
    let ka = fs::read(a.path().join("kernels.csv")).unwrap();
    assert_eq!(ka, fs::read(b.path().join("kernels.csv")).unwrap());
    let text = String::from_utf8(ka).unwrap();
    assert_eq!(text.lines().next(), Some("eta,u1,k,f,H"));
    assert_eq!(text.lines().count(), 502);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["estimate", "--lambda", "0.1", "--alpha-steps", "60", "--kappa", "0.7"];
    assert_eq!(twistshock(a.path(), &args), 0);
    let cfg = a.path().join("resolved_config.json");
    let cfg_str = cfg.to_str().unwrap();
    assert_eq!(twistshock(b.path(), &["estimate", "--config", cfg_str]), 0);
    for f in ["estimate.csv", "estimate.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let v = read_json(&cfg);
    assert_eq!(v["command"], "estimate");
    assert_eq!(v["lambda"], 0.1);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("in.json");
    fs::write(&cfg, r#"{"command": "estimate", "lambda": 0.05, "alpha_steps": 40}"#).unwrap();
    let code = twistshock(dir.path(), &["estimate", "--config", cfg.to_str().unwrap(), "--lambda", "0.12"]);
    assert_eq!(code, 0);
    let v = read_json(&dir.path().join("resolved_config.json"));
    assert_eq!(v["lambda"], 0.12);
    assert_eq!(v["alpha_steps"], 40);
}

#[test]
fn showcase_estimate_is_written() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(twistshock(dir.path(), &["estimate", "--alpha-steps", "200"]), 0);
    let v = read_json(&dir.path().join("estimate.json"));
    let t = v["t_hat_c"].as_f64().unwrap();
    assert!((t - 5.19).abs() < 0.05, "{t}");
    assert_eq!(v["accepted"], true);
    let csv = fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
    assert!(csv.starts_with("alpha,t_c,selection_residual,status\n"));
}

#[test]
fn bad_input_exits_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(twistshock(dir.path(), &["estimate", "--lambda", "0"]), 2);
    assert_eq!(twistshock(dir.path(), &["estimate", "--lambda", "-1"]), 2);
    assert_eq!(twistshock(dir.path(), &["simulate", "--xmax", "5"]), 2);
    assert_eq!(twistshock(dir.path(), &["simulate", "--nx", "4000"]), 2);
    assert_eq!(twistshock(dir.path(), &["kernels", "--no-such-flag"]), 2);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"lamda": 0.1}"#).unwrap();
    assert_eq!(twistshock(dir.path(), &["estimate", "--config", cfg.to_str().unwrap()]), 2);
    fs::write(&cfg, r#"{"command": "sweep"}"#).unwrap();
    assert_eq!(twistshock(dir.path(), &["estimate", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn simulate_writes_a_flat_shock_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--xmax", "30", "--nx", "3001", "--t-end", "4", "--snap-every", "1"];
    assert_eq!(twistshock(dir.path(), &args), 0);
    let v = read_json(&dir.path().join("shock.json"));
    assert_eq!(v["detected"], true);
    let t = v["t_star"].as_f64().unwrap();
    assert!(t > 3.0 && t < 4.0, "{t}");
    let diag = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("t,E,M,max_wx,max_wxx,boundary_err\n"));
    assert!(dir.path().join("snapshots.csv").exists());
}

#[test]
fn characteristics_reports_each_origin() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "characteristics",
        "--xmax",
        "30",
        "--nx",
        "3001",
        "--t-end",
        "5",
        "--origins",
        "0.21,0.5",
    ];
    assert_eq!(twistshock(dir.path(), &args), 0);
    let v = read_json(&dir.path().join("lemmas.json"));
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["origin"], 0.21);
    assert!(reports.iter().all(|r| r["all_pass"] == true));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(twistshock(dir.path(), &["verify"]), 0);
    assert_eq!(read_json(&dir.path().join("verify.json"))["all_pass"], true);
}
