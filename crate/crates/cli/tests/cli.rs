//! End-to-end smoke tests of the binary: every stdout contract the other
//! commands and scripts rely on.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glasslab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("glasslab-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn json_stdout(out: &std::process::Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

#[test]
fn meanfield_emits_the_solution_as_json() {
    let out = bin()
        .args(["meanfield", "--theta", "0", "--theta1", "2"])
        .output()
        .unwrap();
    let sol = json_stdout(&out);
    let mu = sol["mu"].as_f64().unwrap();
    assert!((mu - 0.957_504_024_077_268_7).abs() < 1e-6, "mu {mu}");
    assert_eq!(sol["regime"], "Low");
}

#[test]
fn variance_reports_the_high_temperature_value() {
    let out = bin()
        .args(["variance", "--theta", "0", "--theta1", "0.5"])
        .output()
        .unwrap();
    let report = json_stdout(&out);
    assert_eq!(report["values"]["V_small_high"].as_f64().unwrap(), 2.0);
    assert_eq!(report["regime"], "high");
}

#[test]
fn simulate_test_recover_round_trip() {
    let dir = temp_dir("roundtrip");
    let batch = dir.join("batch.bin");
    let out = bin()
        .args([
            "simulate", "--n", "24", "--k", "5", "--theta", "0.2", "--theta1", "0.8",
        ])
        .args([
            "--draws",
            "10",
            "--burn-in",
            "40",
            "--thin",
            "1",
            "--seed",
            "42",
        ])
        .arg("--out")
        .arg(&batch)
        .output()
        .unwrap();
    let header = json_stdout(&out);
    assert_eq!(header["draws"], 10);
    assert!(batch.is_file());

    let out = bin()
        .args(["test", "--regime", "high", "--delta", "0.5", "--input"])
        .arg(&batch)
        .output()
        .unwrap();
    let decision = json_stdout(&out);
    assert_eq!(decision["test_name"], "high_temp");
    assert!(decision["statistic"].as_f64().is_some());
    assert!(decision["reject"].is_boolean());

    let out = bin()
        .args(["recover", "--truth", "0,1,2,3,4", "--input"])
        .arg(&batch)
        .output()
        .unwrap();
    let result = json_stdout(&out);
    assert_eq!(result["s_hat"].as_array().unwrap().len(), 5);
    assert!(result["exact"].is_boolean());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn power_curve_persists_deterministic_csv_and_json() {
    let dir = temp_dir("power");
    let run = || {
        let out = bin()
            .args(["power-curve", "--n", "20", "--k", "3", "--theta", "0"])
            .args(["--theta1", "0.8", "--draws", "6", "--reps", "5"])
            .args(["--burn-in", "15", "--seed", "99", "--out-dir"])
            .arg(&dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let paths: Vec<String> = String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .map(str::to_owned)
            .collect();
        assert_eq!(paths.len(), 2);
        std::fs::read_to_string(&paths[0]).unwrap()
    };
    let first = run();
    assert!(first.starts_with("n,k,theta,theta1,field,m,metric,value,std_error"));
    assert!(first.contains(",risk,"));
    let second = run();
    assert_eq!(first, second);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("power-curve.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["seed"], 99);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn experiment_commands_require_a_seed() {
    let out = bin()
        .args([
            "power-curve",
            "--n",
            "20",
            "--k",
            "3",
            "--theta",
            "0",
            "--theta1",
            "0.8",
        ])
        .args(["--draws", "6"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn malformed_field_laws_are_rejected() {
    let out = bin()
        .args([
            "meanfield",
            "--theta",
            "0",
            "--theta1",
            "0.5",
            "--field",
            "poisson:3",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field law"));
}
