use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy.csv")
}

fn sr4fit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sr4fit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FAST: [&str; 4] = ["--rmax", "20", "--lambda", "0.05"];

fn train_toy(dir: &Path) -> PathBuf {
    let out = dir.to_str().unwrap();
    let data = toy();
    let mut args = vec!["train", "--data", data.to_str().unwrap(), "--target", "label", "--out", out];
    args.extend(FAST);
    let o = sr4fit(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("model.json")
}

#[test]
fn train_writes_loadable_model_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_toy(dir.path());
    assert!(model.exists());
    let report = fs::read_to_string(dir.path().join("rules.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("class ")).count(), 3);

    let o = sr4fit(&["rules", "--model", model.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), report);
}

#[test]
fn predict_reproduces_training_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy();
    let mut args = vec!["train", "--data", data.to_str().unwrap(), "--target", "label"];
    let out = dir.path().to_str().unwrap();
    args.extend(["--out", out]);
    args.extend(FAST);
    let o = sr4fit(&args);
    let line = stdout(&o).lines().find(|l| l.starts_with("training accuracy")).unwrap().to_string();
    let reported: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();

    let model = dir.path().join("model.json");
    let o = sr4fit(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        toy().to_str().unwrap(),
        "--target",
        "label",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let truth = fs::read_to_string(toy()).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next().unwrap(), "row,predicted,p_low,p_mid,p_high");
    let (mut hits, mut total) = (0, 0);
    for (p, t) in lines.zip(truth.lines().skip(1)) {
        let predicted = p.split(',').nth(1).unwrap();
        hits += usize::from(t.ends_with(&format!(",{predicted}")));
        total += 1;
    }
    assert_eq!(total, 120);
    assert!((hits as f64 / total as f64 - reported).abs() < 5e-5);
}

#[test]
fn predict_rejects_renamed_column_and_accepts_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_toy(dir.path());
    let renamed = dir.path().join("renamed.csv");
    fs::write(&renamed, "alpha,BETA,noise\n1,2,3\n").unwrap();
    let o = sr4fit(&["predict", "--model", model.to_str().unwrap(), "--data", renamed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("feature names do not match"));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "alpha,beta,noise\n").unwrap();
    let o = sr4fit(&["predict", "--model", model.to_str().unwrap(), "--data", empty.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "row,predicted,p_low,p_mid,p_high\n");
}

#[test]
fn usage_and_io_exit_codes() {
    let o = sr4fit(&["train", "--data", toy().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--target"));

    let o = sr4fit(&["train", "--data", "/nonexistent/x.csv", "--target", "label"]);
    assert_eq!(o.status.code(), Some(1));

    let o = sr4fit(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let o = sr4fit(&["train", "--data", toy().to_str().unwrap(), "--target", "label", "--kappa", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"n_trials": "many"}"#).unwrap();
    let o = sr4fit(&["trials", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn run_trials(dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"data": {:?}, "target": "label", "n_trials": 3, "hyperparams": {{"r_max": 20, "lambda": 0.05, "kappa": 1.0}},
                "forest": {{"n_trees": 5}}, "out": {:?}}}"#,
            toy(),
            dir.join("out")
        ),
    )
    .unwrap();
    let mut args = vec!["trials", "--config", cfg.to_str().unwrap()];
    args.extend(extra);
    sr4fit(&args)
}

#[test]
fn trials_are_byte_identical_and_summary_matches_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run_trials(d.path(), &[]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trials.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.path().join("out").join(f)).unwrap(),
            fs::read(b.path().join("out").join(f)).unwrap(),
            "{f}"
        );
    }

    let csv = fs::read_to_string(a.path().join("out/trials.csv")).unwrap();
    let summary: Value = serde_json::from_str(&fs::read_to_string(a.path().join("out/summary.json")).unwrap()).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for metric in ["accuracy", "precision", "recall", "f1", "n_rules"] {
        let col = header.iter().position(|h| *h == metric).unwrap();
        let values: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((summary[metric]["mean"].as_f64().unwrap() - mean).abs() < 1e-12, "{metric}");
    }
    assert!(summary["stability"].as_f64().is_some());
    assert!(summary["ips"].as_f64().is_some());
    assert!(summary["t_test"].is_null());
}

#[test]
fn trials_with_baseline_report_t_tests() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_trials(dir.path(), &[]).status.success());
    let baseline = dir.path().join("baseline.csv");
    fs::copy(dir.path().join("out/trials.csv"), &baseline).unwrap();
    let o = run_trials(dir.path(), &["--baseline", baseline.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["t_test"]["accuracy"]["p_value"], 1.0);
    assert_eq!(summary["t_test"]["accuracy"]["df"], 2);
}

#[test]
fn single_trial_warns_and_omits_ips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_trials(dir.path(), &["--trials", "1"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert!(summary["stability"].is_null());
    assert!(summary.get("ips").is_none());
}

#[test]
fn grid_writes_chosen_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.json.in");
    fs::write(
        &cfg,
        r#"{"grid": {"r_max": [10, 20], "lambda": [0.05, 1000000.0], "kappa": [1.0]}, "validation_trials": 2,
            "forest": {"n_trees": 5}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = sr4fit(&[
        "grid",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        toy().to_str().unwrap(),
        "--target",
        "label",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid: Value = serde_json::from_str(&fs::read_to_string(out.join("grid.json")).unwrap()).unwrap();
    assert_eq!(grid["points"].as_array().unwrap().len(), 4);
    assert_eq!(grid["chosen"]["lambda"], 0.05);
}
