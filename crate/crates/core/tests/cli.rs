use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adhere::cohort::io::read_cohort;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn adhere(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adhere"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run adhere")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "adhere failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_extract_label_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let enc = fixture("encounters.csv");
    let pat = fixture("patients.csv");
    let notes = fixture("notes.json");
    ok(adhere(
        &["cohort", "build", "--encounters", path(&enc), "--patients", path(&pat), "--notes", path(&notes)],
        d,
    ));
    let cohort = d.join("cohort.csv");
    let built = read_cohort(&cohort, None).unwrap();
    assert_eq!(built.len(), 5);
    assert!(built.iter().all(|r| r.adherence.is_none()));

    let stdout = ok(adhere(&["extract", "--cohort", path(&cohort), "--notes", path(&notes)], d));
    assert!(stdout.contains("labeled 5 of 5"), "{stdout}");
    let labeled = read_cohort(&d.join("labeled_cohort.csv"), None).unwrap();
    let flags: Vec<(String, bool)> = labeled
        .iter()
        .map(|r| (r.patient_id().to_string(), r.adherence.as_ref().unwrap().non_adherent))
        .collect();
    assert_eq!(
        flags,
        [
            ("A1".to_string(), true),
            ("A2".to_string(), false),
            ("A3".to_string(), false),
            ("A4".to_string(), true),
            ("A5".to_string(), true),
        ]
    );
    let jsonl = std::fs::read_to_string(d.join("extraction.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 5);
    assert!(jsonl.contains("ran out of amlodipine and did not refill it"));
}

#[test]
fn negated_mention_is_not_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let notes = fixture("notes.json");
    ok(adhere(
        &[
            "cohort",
            "build",
            "--encounters",
            path(&fixture("encounters.csv")),
            "--patients",
            path(&fixture("patients.csv")),
            "--notes",
            path(&notes),
        ],
        d,
    ));
    ok(adhere(&["extract", "--cohort", path(&d.join("cohort.csv")), "--notes", path(&notes)], d));
    let jsonl = std::fs::read_to_string(d.join("extraction.jsonl")).unwrap();
    assert!(!jsonl.contains("denies having stopped"));
}

#[test]
fn generated_cohort_round_trips_through_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(adhere(&["generate", "--n", "1500", "--seed", "4"], d));
    for f in ["cohort.csv", "notes.json", "truth.json", "config.toml"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let cohort = d.join("cohort.csv");
    let factors = ok(adhere(&["analyze", "factors", "--cohort", path(&cohort)], d));
    assert!(factors.contains("race=black"));
    let outcome = ok(adhere(&["analyze", "outcome", "--cohort", path(&cohort), "--format", "structured"], d));
    assert!(outcome.contains("systolic_reduction"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("outcome.json")).unwrap()).unwrap();
    assert!(v.is_object());
    let ate = ok(adhere(
        &["ate", "--cohort", path(&cohort), "--base", "linear", "--estimators", "ipw,t_learner"],
        d,
    ));
    assert!(ate.contains("adherent_only"));
    let csv = std::fs::read_to_string(d.join("ate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn topics_from_clusters_file() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(adhere(&["topics", "--input", path(&fixture("clusters.csv")), "--k", "2"], dir.path()));
    assert_eq!(stdout.lines().next().unwrap(), "cluster 0\t44.4%\trefill, not");
    assert!(!stdout.contains("cluster -1"));
}

#[test]
fn experiment_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = fixture("experiment.toml");
    ok(adhere(
        &["experiment", "vary-ratio", "--config", path(&cfg), "--models", "logistic", "--format", "structured", "--chart"],
        d,
    ));
    let svg = std::fs::read_to_string(d.join("vary_ratio.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let again = d.join("again");
    ok(adhere(&["report", "--input", path(&d.join("vary_ratio.json"))], &again));
    let summary = std::fs::read_to_string(again.join("vary_ratio_summary.csv")).unwrap();
    assert!(summary.contains("ratio=0.5"));
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(adhere(&["generate", "--n", "800"], d));
    let cohort = d.join("cohort.csv");
    ok(adhere(&["train", "--cohort", path(&cohort), "--model", "logistic"], d));
    ok(adhere(&["predict", "--cohort", path(&cohort), "--model", path(&d.join("model.json"))], d));
    let preds = std::fs::read_to_string(d.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 801);
}

#[test]
fn failures_print_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = adhere(&["analyze", "outcome", "--cohort", "/nonexistent/cohort.csv"], dir.path());
    assert!(!out.status.success());
    let line = String::from_utf8(out.stderr).unwrap();
    let rec: serde_json::Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    assert_eq!(rec["error"], "io");
    assert!(rec["message"].as_str().unwrap().contains("/nonexistent/cohort.csv"));
}

#[test]
fn infeasible_experiment_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.toml");
    std::fs::write(&cfg, "test_size = 5000\nn_seeds = 1\n[source]\nkind = \"synthetic\"\n[source.config]\nn = 900\n").unwrap();
    let out = adhere(&["experiment", "vary-ratio", "--config", path(&cfg)], dir.path());
    assert!(!out.status.success());
    let rec: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(rec["error"], "infeasible");
}
