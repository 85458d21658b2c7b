use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use causal_ic::student;
use serde_json::Value;

const FAST: [&str; 10] =
    ["--epochs", "20", "--folds", "2", "--gp-restarts", "1", "--gp-iters", "5", "--max-iters", "40"];

fn schema() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/student-schema.json")
}

fn small_data(dir: &Path, rows: usize) -> PathBuf {
    let path = dir.join("student.csv");
    std::fs::write(&path, student::generate_csv(rows, 11)).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal-ic")).args(args).env_remove("CAUSAL_IC_SEED").output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `--max-iters` belongs to optimize/evaluate, not train.
fn train_flags() -> Vec<&'static str> {
    FAST[..8].to_vec()
}

fn train(data: &Path, out: &Path, seed: &str) -> Output {
    let schema = schema();
    let mut args = vec!["train", "--data", s(data), "--schema", s(&schema), "--out", s(out), "--seed", seed];
    args.extend(train_flags());
    ok(run(&args))
}

#[test]
fn train_is_deterministic_and_selects_from_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 120);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&data, &a, "4");
    train(&data, &b, "4");
    for file in [
        "manifest.json",
        "models/gps.json",
        "models/f.json",
        "models/f-prime.json",
        "models/h.json",
        "models/h-prime.json",
    ] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let grid: Vec<Value> = serde_json::from_str("[[16],[32],[16,16],[32,16]]").unwrap();
    for key in ["classifier", "weighted_classifier"] {
        assert!(grid.contains(&manifest[key]["selected_hidden"]), "{key}: {}", manifest[key]);
    }
    let opt = manifest["optimization_rows"].as_array().unwrap().len();
    let val = manifest["validation_rows"].as_array().unwrap().len();
    assert_eq!((opt, val), (60, 60));
}

#[test]
fn seed_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 60);
    let out = dir.path().join("m");
    let schema = schema();
    let mut args = vec!["train", "--data", s(&data), "--schema", s(&schema), "--out", s(&out)];
    args.extend(train_flags());
    let status = Command::new(env!("CARGO_BIN_EXE_causal-ic")).args(&args).env("CAUSAL_IC_SEED", "99").output().unwrap();
    ok(status);
    let manifest: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 99);
}

#[test]
fn missing_schema_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 30);
    let missing = dir.path().join("nope.json");
    for cmd in ["train", "evaluate"] {
        let out = run(&[cmd, "--data", s(&data), "--schema", s(&missing), "--out", s(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("schema not found"));
    }
}

#[test]
fn missing_data_is_a_plain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--data", s(&dir.path().join("x.csv")), "--schema", s(&schema()), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

fn policies(stdout: &[u8]) -> Vec<Value> {
    serde_json::from_slice::<Value>(stdout).unwrap().as_array().unwrap().clone()
}

#[test]
fn optimize_respects_budget_and_zero_budget_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 80);
    let models = dir.path().join("m");
    train(&data, &models, "2");
    let doc: Value = serde_json::from_slice(&std::fs::read(schema()).unwrap()).unwrap();
    let up: Vec<f64> = serde_json::from_value(doc["cost_up"].clone()).unwrap();
    let down: Vec<f64> = serde_json::from_value(doc["cost_down"].clone()).unwrap();

    for variant in ["f", "f-prime-no-opt", "f-prime-opt", "g"] {
        for budget in ["0", "1.5"] {
            let out = ok(run(&[
                "optimize",
                "--data",
                s(&data),
                "--schema",
                s(&schema()),
                "--out",
                s(&models),
                "--variant",
                variant,
                "--budget",
                budget,
                "--lambda",
                "0.5",
                "--max-iters",
                "60",
            ]));
            let records = policies(&out.stdout);
            assert_eq!(records.len(), 40);
            let b: f64 = budget.parse().unwrap();
            for r in &records {
                let mut spent = 0.0;
                for (t, tr) in r["treatments"].as_array().unwrap().iter().enumerate() {
                    let delta = tr["delta"].as_f64().unwrap();
                    if b == 0.0 {
                        assert_eq!(delta, 0.0);
                    }
                    spent += up[t] * delta.max(0.0) + down[t] * (-delta).max(0.0);
                    let opt = tr["optimized"].as_f64().unwrap();
                    assert!((0.0..=1.0).contains(&opt));
                }
                assert!(spent <= b + 1e-8, "{variant}: spent {spent} > {b}");
                assert!(r["objective_best"].as_f64().unwrap() <= r["objective_start"].as_f64().unwrap());
            }
            let written: Value = serde_json::from_slice(&std::fs::read(models.join("policies.json")).unwrap()).unwrap();
            assert_eq!(written.as_array().unwrap(), &records);
        }
    }
}

#[test]
fn optimize_rejects_rows_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 40);
    let models = dir.path().join("m");
    train(&data, &models, "2");
    let out = run(&["optimize", "--data", s(&data), "--schema", s(&schema()), "--out", s(&models), "--rows", "3,400"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}

fn evaluate(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let schema = schema();
    let mut args = vec!["evaluate", "--data", s(data), "--schema", s(&schema), "--out", s(out), "--seed", "6"];
    args.extend(FAST);
    args.extend(extra);
    run(&args)
}

#[test]
fn evaluate_writes_a_reproducible_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 60);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sweep = ["--budget", "0,1,2", "--variant", "f,g", "--lambda", "0,1"];
    ok(evaluate(&data, &a, &sweep));
    ok(evaluate(&data, &b, &sweep));
    let csv = std::fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(b.join("sweep.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());
    // f contributes one cell per budget, g one per (budget, λ); two metrics each.
    assert_eq!(csv.lines().count(), 1 + 2 * (3 + 3 * 2));
    for line in csv.lines().skip(1).filter(|l| l.starts_with("f,0,") || l.starts_with("g,0,")) {
        if line.contains(",ifee,") {
            assert!(line.ends_with(",0"), "{line}");
        }
    }
}

#[test]
fn empty_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 30);
    let out = evaluate(&data, dir.path(), &["--budget", ""]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty sweep"));
}
