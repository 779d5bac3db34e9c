use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
# small and quick
max_epochs = 8
patience = 8
n_source = 80
n_validation = 20
n_target = 100
m = 3
n = 4
";

fn gdu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdu"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gdu(dir, args);
    assert!(
        out.status.success(),
        "gdu {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.kv"), SMALL).unwrap();
    ok(dir.path(), &["gen", "--config", "small.kv", "--out", "data"]);
    std::fs::write(dir.path().join("run.kv"), format!("{SMALL}data = data\n")).unwrap();
    dir
}

#[test]
fn gen_train_eval_export_round_trip() {
    let dir = setup();
    let d = dir.path();
    for f in ["train.csv", "validation.csv", "target.csv", "benchmark.kv"] {
        assert!(d.join("data").join(f).exists(), "{f} missing");
    }
    ok(d, &["train", "--config", "run.kv", "--mode", "projection", "--out", "model"]);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model/metrics.json")).unwrap()).unwrap();
    let trace = std::fs::read_to_string(d.join("model/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + metrics["epochs"].as_u64().unwrap() as usize);

    ok(d, &["eval", "--config", "run.kv", "--checkpoint", "model/model.ckpt", "--out", "eval"]);
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("eval/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["target_acc"], metrics["target_acc"]);
    assert_eq!(eval["val_acc"], metrics["val_acc"]);

    let export = |out: &str| {
        ok(d, &["export-embeddings", "--config", "run.kv", "--checkpoint", "model/model.ckpt", "--out", out]);
        std::fs::read_to_string(d.join(out).join("embeddings.csv")).unwrap()
    };
    let first = export("emb1");
    assert_eq!(first, export("emb2"));
    let samples = std::fs::read_to_string(d.join("data/target.csv")).unwrap().lines().count() - 1;
    assert_eq!(first.lines().count(), 1 + samples + 3);
    assert_eq!(first.lines().filter(|l| l.starts_with("basis,")).count(), 3);
}

#[test]
fn run_writes_one_row_per_method_and_seed() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["run", "--config", "run.kv", "--seed", "4", "--out", "res"]);
    let csv = std::fs::read_to_string(d.join("res/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("res/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
}

#[test]
fn select_m_and_pareto_check_report() {
    let dir = setup();
    let d = dir.path();
    let out = ok(d, &["select-m", "--config", "small.kv", "--raw", "--k-min", "2", "--k-max", "6", "--runs", "3", "--out", "sel"]);
    assert!(out.contains("chosen M = "));
    assert_eq!(std::fs::read_to_string(d.join("sel/select_m.csv")).unwrap().lines().count(), 1 + 5);

    ok(d, &["pareto-check", "--config", "small.kv", "--loss", "zero_one", "--samples", "50", "--out", "par"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("par/pareto.json")).unwrap()).unwrap();
    assert_eq!(report["is_pareto"], true);
    assert!(report["dominating_witness"].is_null());
}

#[test]
fn sweep_over_m() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("one.kv"), format!("{SMALL}data = data\nmethods = gdu_mmd_ft\nseeds = 0\n")).unwrap();
    ok(d, &["sweep", "--config", "one.kv", "--param", "m", "--values", "2,3", "--out", "sw"]);
    let csv = std::fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("m,2,gdu_mmd_ft,1,"));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("missing.kv"), "data = nowhere\n").unwrap();
    let out = gdu(d, &["train", "--config", "missing.kv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));

    std::fs::write(d.join("typo.kv"), "lamda_ols = 1\n").unwrap();
    let out = gdu(d, &["run", "--config", "typo.kv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda_ols"));

    let out = gdu(d, &["train", "--mode", "softmax"]);
    assert!(!out.status.success());
    let out = gdu(d, &["eval", "--config", "run.kv", "--checkpoint", "absent.ckpt"]);
    assert!(!out.status.success());
}
