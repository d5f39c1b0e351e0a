use std::path::Path;

use ahumpc::fos::{step_response, FosParams, TemperatureTrace};
use ahumpc::report::write_curve_csv;
use assert_cmd::Command;
use serde_json::Value;

fn ahumpc() -> Command {
    Command::cargo_bin("ahumpc").unwrap()
}

fn json(out: &[u8]) -> Value {
    serde_json::from_slice(out).unwrap()
}

fn small_scenario(dir: &Path, controller: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{controller}.toml"));
    std::fs::write(
        &path,
        format!(
            r#"schema_version = 1
name = "small"
seed = 5
start_date = "2023-01-09"
days = 2
warmup_days = 1
controller = "{controller}"

[surrogate]
hidden = [8, 8, 8, 8, 8]
max_epochs = 3
patience = 2
folds = 2
max_train_samples = 300
"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn extract_fos_recovers_a_generated_curve() {
    let dir = tempfile::tempdir().unwrap();
    let p = FosParams::new(-7.0, 110.0, 13.0, 24.0).unwrap();
    let temps = (0..=1440).map(|t| step_response(&p, 1.0, t as f64).unwrap()).collect();
    let csv = dir.path().join("curve.csv");
    write_curve_csv(&csv, &TemperatureTrace::new(0.0, 1.0, temps).unwrap()).unwrap();

    let out = ahumpc()
        .args(["extract-fos", "--direction", "decreasing", "--curve"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert!((v["kp"].as_f64().unwrap() + 7.0).abs() < 0.07);
    assert!((v["tau"].as_f64().unwrap() - 110.0).abs() < 1.0);
    assert_eq!(v["theta"].as_f64().unwrap(), 13.0);

    ahumpc()
        .args(["extract-fos", "--direction", "increasing", "--curve"])
        .arg(&csv)
        .assert()
        .failure();
}

#[test]
fn map_endpoints_and_bounds() {
    let base = [
        "map",
        "--kp-inc",
        "6",
        "--tau-inc",
        "90",
        "--kp-dec=-5",
        "--tau-dec",
        "150",
        "--t-init",
        "20",
    ];
    let on = |u: &str, extra: &[&str]| {
        let out = ahumpc().args(base).args(["--u", u]).args(extra).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        json(&out.stdout)["on_minutes"].as_f64().unwrap()
    };
    assert_eq!(on("0", &[]), 0.0);
    assert_eq!(on("1", &[]), 30.0);
    let mid = on("0.5", &[]);
    assert!(mid > 0.0 && mid < 30.0);
    assert!(on("0.4", &[]) <= mid);
    assert_eq!(on("0.4", &["--analog"]), 12.0);
    // Warm start: the state reading runs the fan for less time.
    assert!(on("0.5", &["--from-state", "--fit-temp", "14"]) < mid);

    ahumpc().args(base).args(["--u", "1.5"]).assert().failure();
}

#[test]
fn simulate_report_train_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let mpc = dir.path().join("mpc");
    let manual = dir.path().join("manual");
    ahumpc()
        .args(["simulate", "--export-datasets", "--scenario"])
        .arg(small_scenario(dir.path(), "mpc"))
        .arg("--out")
        .arg(&mpc)
        .assert()
        .success();
    ahumpc()
        .args(["simulate", "--scenario"])
        .arg(small_scenario(dir.path(), "manual"))
        .arg("--out")
        .arg(&manual)
        .assert()
        .success();
    for f in [
        "run.json",
        "movements.jsonl",
        "ait.jsonl",
        "sensor.jsonl",
        "fos.jsonl",
        "metrics.jsonl",
        "report.txt",
    ] {
        assert!(mpc.join(f).is_file(), "{f}");
    }
    assert!(mpc.join("models/increasing.json").is_file());
    assert!(mpc.join("datasets/decreasing_test.jsonl").is_file());
    assert!(!manual.join("fos.jsonl").exists());

    let exported = dir.path().join("exported");
    let out = ahumpc()
        .args(["report", "--run"])
        .arg(&mpc)
        .arg("--out")
        .arg(&exported)
        .output()
        .unwrap();
    assert!(out.status.success());
    let movements = std::fs::read_to_string(exported.join("movements.csv")).unwrap();
    assert_eq!(movements.lines().count(), 1 + 96);

    let models = dir.path().join("offline");
    ahumpc()
        .args(["train", "--seed", "3", "--direction", "increasing", "--data"])
        .arg(&mpc)
        .arg("--out")
        .arg(&models)
        .assert()
        .success();
    assert!(models.join("increasing.json").is_file());
    assert!(!models.join("decreasing.json").exists());
    assert!(std::fs::read_to_string(models.join("metrics.txt"))
        .unwrap()
        .contains("offline"));

    let cmp = dir.path().join("cmp");
    let out = ahumpc()
        .args(["compare", "--candidate"])
        .arg(&mpc)
        .arg("--baseline")
        .arg(&manual)
        .arg("--out")
        .arg(&cmp)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&std::fs::read(cmp.join("comparison.json")).unwrap());
    assert_eq!(report["days"], 2);
    assert!(report["baseline"]["kwh"].as_f64().unwrap() > 0.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("savings"));
}

#[test]
fn compare_rejects_mismatched_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path(), "manual");
    for (name, seed) in [("a", "1"), ("b", "2")] {
        ahumpc()
            .args(["simulate", "--days", "1", "--seed", seed, "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(dir.path().join(name))
            .assert()
            .success();
    }
    let out = ahumpc()
        .args(["compare", "--candidate"])
        .arg(dir.path().join("a"))
        .arg("--baseline")
        .arg(dir.path().join("b"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_scenario_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 9\n").unwrap();
    let out = ahumpc()
        .args(["simulate", "--out"])
        .arg(dir.path())
        .arg("--scenario")
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
    ahumpc()
        .args(["simulate", "--scenario"])
        .arg(dir.path().join("missing.toml"))
        .assert()
        .failure();
}
