use std::path::Path;
use std::process::{Command, Output};

fn isingml(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isingml"))
        .args(args)
        .current_dir(dir)
        .env_remove("ISINGML_SEED")
        .env_remove("ISINGML_DATA")
        .env_remove("ISINGML_CONFIG")
        .output()
        .expect("launch isingml")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = isingml(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn synth(dir: &Path) {
    ok(
        &["synth", "--features", "5", "--delta", "2", "--n-per-class", "30", "--seed", "1", "--out", "d.csv"],
        dir,
    );
}

#[test]
fn synth_writes_labelled_csv() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("sample_id,label,"));
    assert_eq!(lines.count(), 60);
}

#[test]
fn benchmark_with_flags_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &[
            "benchmark", "--data", "d.csv", "--methods", "field,ridge", "--pca-k", "0", "--splits", "3",
            "--out-dir", "o",
        ],
        dir.path(),
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/benchmark_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["per_split_metrics"].as_array().unwrap().len(), 6);
    let metrics = std::fs::read_to_string(dir.path().join("o/benchmark_metrics.csv")).unwrap();
    assert!(metrics.starts_with("master_seed,config_digest,"));
    assert_eq!(metrics.lines().count(), 7);

    let out = ok(
        &["stats", "--input", "o/benchmark_metrics.csv", "--methods", "field,ridge"],
        dir.path(),
    );
    assert!(!out.stdout.is_empty());
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &["train", "--data", "d.csv", "--method", "field", "--pca-k", "0", "--out", "m.json"],
        dir.path(),
    );
    ok(
        &["evaluate", "--model", "m.json", "--data", "d.csv", "--out", "e.json", "--predictions", "p.csv"],
        dir.path(),
    );
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.json")).unwrap()).unwrap();
    assert!(metrics.to_string().contains("balanced_accuracy"));
    let preds = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(preds.lines().count(), 61);
}

#[test]
fn solve_reads_text_problem() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "3\n1 -1 0.5\n0 1 -0.25\n1 2 0.75\n").unwrap();
    let out = ok(&["solve", "--problem", "p.txt", "--solver", "exhaustive", "--top", "2"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_spins"], 3);
    assert_eq!(v["configurations"].as_array().unwrap().len(), 2);
    let best = v["best_energy"].as_f64().unwrap();
    assert!(v["ensemble_energy"].as_f64().unwrap() <= best + 1e-12);
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = isingml(&["benchmark"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no dataset"));

    synth(dir.path());
    let out = isingml(&["benchmark", "--data", "d.csv", "--methods", "svm"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown method"));

    std::fs::write(dir.path().join("bad.toml"), "sede = 1\n").unwrap();
    let out = isingml(&["benchmark", "--config", "bad.toml"], dir.path());
    assert!(!out.status.success());
}
