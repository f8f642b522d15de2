use std::path::{Path, PathBuf};
use std::process::Command;

fn mimic() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/mimic")
}

fn eval(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_eval")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "eval {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_ti(out: &Path, seeds: &[&str]) {
    let dataset = mimic().join("umwp_mimic.jsonl");
    let cfg = mimic().join("trace_inversion.toml");
    let mut args = vec![
        "run",
        "--dataset",
        dataset.to_str().unwrap(),
        "--backend",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    for s in seeds {
        args.extend(["--seed", s]);
    }
    eval(&args);
}

#[test]
fn run_tallies_the_mimic_set() {
    let dir = tempfile::tempdir().unwrap();
    run_ti(dir.path(), &["0"]);
    let line = std::fs::read_to_string(dir.path().join("results.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["counts"]["tp"], 3);
    assert_eq!(v["counts"]["tn"], 4);
    assert_eq!(v["counts"]["fp"], 2);
    assert_eq!(v["counts"]["fn"], 1);
    let log = dir.path().join("logs/trace_inversion_umwp_mimic-model_seed0.jsonl");
    assert_eq!(std::fs::read_to_string(log).unwrap().lines().count(), 10);
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ti(a.path(), &["0", "1"]);
    run_ti(b.path(), &["0", "1"]);
    let strip = |p: &Path| -> Vec<serde_json::Value> {
        std::fs::read_to_string(p.join("results.jsonl"))
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("decision_log");
                v
            })
            .collect()
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn aggregate_and_gap_render() {
    let dir = tempfile::tempdir().unwrap();
    run_ti(dir.path(), &["0", "1"]);
    let input = dir.path().to_str().unwrap();
    let text = eval(&["aggregate", "--in", input]);
    assert!(text.contains("Trace Inversion"));
    assert!(text.contains("0.700"));
    let csv = eval(&["aggregate", "--in", input, "--format", "csv"]);
    let header = csv.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 3 + 13);
    let tables = dir.path().join("tables");
    eval(&["aggregate", "--in", input, "--out", tables.to_str().unwrap()]);
    let reparsed = eval(&["aggregate", "--in", tables.join("table.csv").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(reparsed, csv);
    let gap = eval(&["gap", "--in", input]);
    assert!(gap.contains("Math & Knowledge"));
}

#[test]
fn bad_arguments_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_eval"))
        .args(["aggregate", "--in", "/nonexistent/results.jsonl"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_eval"))
        .args(["run", "--method", "oracle", "--dataset", "x", "--backend", "y", "--out", "z"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
