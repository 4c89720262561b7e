//! End-to-end runs of the `cef` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cef_core::catalog::Catalog;
use cef_core::rank::{label_from_model, write_ranked_labels, ModelFile};
use cef_study::context::StudyCharacter;
use serde_json::Value;

fn cef(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cef")).args(args).output().expect("cef runs")
}

fn ok(args: &[&str]) -> String {
    let out = cef(args);
    assert!(out.status.success(), "cef {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bundled_model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/data/models/{name}.json"))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

type Row = BTreeMap<String, String>;

fn participants(report: &Path) -> Vec<Row> {
    let mut rdr = csv::Reader::from_path(report.join("participants.csv")).unwrap();
    rdr.deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn always_ai_bots_score_ten_of_fourteen_with_ai() {
    let tmp = tempfile::tempdir().unwrap();
    let (study, report) = (tmp.path().join("study"), tmp.path().join("report"));
    ok(&["simulate", "--conditions", "all", "--participants-per-condition", "4", "--bot-policy", "always_ai", "--seed", "21", "--out", s(&study)]);
    ok(&["analyze", "--study", s(&study), "--out", s(&report)]);
    let rows = participants(&report);
    assert_eq!(rows.len(), 20);
    for r in rows.iter().filter(|r| r["condition"] != "no_ai") {
        assert_eq!(r["intervention_mean"].parse::<f64>().unwrap(), 10.0 / 14.0, "{r:?}");
        assert_eq!(r["overreliance"], "1.0", "{r:?}");
    }
    assert!(rows.iter().filter(|r| r["condition"] == "no_ai").all(|r| r["overreliance"].is_empty()));
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        ok(&["simulate", "--participants-per-condition", "2", "--bot-policy", "all", "--seed", seed, "--out", s(&dir)]);
        files(&dir)
    };
    let a = run("a", "5");
    assert_eq!(a, run("b", "5"));
    assert_ne!(a, run("c", "6"));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["events.ndjson", "questionnaires.csv", "sessions.csv", "trials.csv"]);

    // a second run into the same directory would interleave two studies
    let again = cef(&["simulate", "--participants-per-condition", "1", "--bot-policy", "never_ai", "--out", s(&tmp.path().join("a"))]);
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn analyze_report_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let study = tmp.path().join("study");
    ok(&["simulate", "--participants-per-condition", "3", "--bot-policy", "noisy_learner,never_ai", "--seed", "9", "--out", s(&study)]);
    ok(&["analyze", "--study", s(&study), "--out", s(&tmp.path().join("r1"))]);
    ok(&["analyze", "--study", s(&study), "--out", s(&tmp.path().join("r2"))]);
    assert_eq!(files(&tmp.path().join("r1")), files(&tmp.path().join("r2")));
    let summary: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("r1/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_sessions"], 30);
}

#[test]
fn analyze_on_empty_dir_fails_with_one_json_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cef(&["analyze", "--study", s(tmp.path()), "--out", s(&tmp.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    let line: Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(line["error"]["message"].as_str().unwrap().contains("no sessions found"), "{line}");
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["simulate", "--bogus"][..], &["train"], &["nope"], &["gen-characters", "--count", "x", "--out", "f"]] {
        let out = cef(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains("Usage") || stderr.contains("--help"), "{args:?}: {stderr}");
    }
    let out = cef(&["simulate", "--participants-per-condition", "1", "--bot-policy", "lazy", "--out", "/nonexistent/x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown policy `lazy`"));
}

#[test]
fn gen_characters_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let path = |n: &str| tmp.path().join(n);
    for (name, seed) in [("a.json", "4"), ("b.json", "4"), ("c.json", "5")] {
        ok(&["gen-characters", "--count", "12", "--seed", seed, "--out", s(&path(name))]);
    }
    let read = |n: &str| std::fs::read(path(n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_ne!(read("a.json"), read("c.json"));
    let chars: Vec<StudyCharacter> = serde_json::from_slice(&read("a.json")).unwrap();
    assert_eq!(chars.len(), 12);
    assert_eq!(chars[11].id(), "char-012");
}

#[test]
fn train_recovers_consistent_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let chars_path = tmp.path().join("chars.json");
    ok(&["gen-characters", "--count", "30", "--seed", "8", "--out", s(&chars_path)]);
    let chars: Vec<StudyCharacter> = serde_json::from_slice(&std::fs::read(&chars_path).unwrap()).unwrap();

    // a small catalog keeps 30 folds quick
    let csv: String = cef_core::data::CATALOG_CSV.lines().take(11).map(|l| format!("{l}\n")).collect();
    let catalog = Catalog::from_csv_str(&csv).unwrap();
    let catalog_path = tmp.path().join("catalog.csv");
    std::fs::write(&catalog_path, &csv).unwrap();

    let truth = ModelFile::bundled_expert().model();
    let pool = catalog.reps();
    let labels: Vec<_> = chars
        .iter()
        .map(|c| label_from_model(c.id(), None, &c.rep, &pool, &truth, 2, 3).unwrap())
        .collect();
    let labels_path = tmp.path().join("labels.csv");
    let mut buf = Vec::new();
    write_ranked_labels(&labels, &mut buf).unwrap();
    std::fs::write(&labels_path, buf).unwrap();

    let train = |out: &Path| -> Value {
        let stdout = ok(&[
            "train", "--labels", s(&labels_path), "--characters", s(&chars_path), "--catalog", s(&catalog_path),
            "--fold-by", "character", "--c", "1.0", "--iterations", "3000", "--out", s(out),
        ]);
        serde_json::from_str(&stdout).unwrap()
    };
    let (m1, m2) = (tmp.path().join("m1.json"), tmp.path().join("m2.json"));
    let summary = train(&m1);
    assert_eq!(summary["folds"], 30);
    assert!(summary["cv_accuracy"].as_f64().unwrap() >= 0.99, "{summary}");
    assert!(summary["cv_accuracy_sd"].as_f64().unwrap() >= 0.0);
    train(&m2);
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());

    assert!(summary["train_accuracy"].as_f64().unwrap() >= 0.99, "{summary}");
    let learned = ModelFile::load(&m1).unwrap();
    assert_eq!(learned.c, 1.0);
    assert_eq!(learned.data_digest.len(), 64);

    // the trained model plugs straight into drop-down selection
    let stdout = ok(&["select-dropdown", "--catalog", s(&catalog_path), "--model", s(&m1), "--k", "4", "--characters", s(&chars_path)]);
    let ids: Vec<&str> = stdout.lines().collect();
    assert_eq!(ids.len(), 4);
    assert!(ids.iter().all(|id| catalog.contains(id)));
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn train_reports_missing_inputs() {
    let out = cef(&["train", "--labels", "/nonexistent/labels.csv", "--characters", "/nonexistent/c.json", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    let line: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(line["error"]["message"].as_str().unwrap().contains("/nonexistent/c.json"));
}

#[test]
fn select_dropdown_default_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let chars = tmp.path().join("chars.json");
    ok(&["gen-characters", "--count", "40", "--out", s(&chars)]);
    let model = bundled_model("expert");
    let out_file = tmp.path().join("dropdown.txt");
    let stdout = ok(&["select-dropdown", "--model", s(&model), "--k", "7", "--characters", s(&chars), "--out", s(&out_file)]);
    assert_eq!(stdout.lines().count(), 7);
    assert_eq!(std::fs::read_to_string(&out_file).unwrap(), stdout);

    let bad = cef(&["select-dropdown", "--model", s(&model), "--k", "0", "--characters", s(&chars)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("cluster count 0"));
}

#[test]
fn foil_audit_is_seeded() {
    let (expert, human) = (bundled_model("expert"), bundled_model("human"));
    let run = |seed: &str| -> Value {
        serde_json::from_str(&ok(&["foil-audit", "--expert", s(&expert), "--human", s(&human), "--datasets", "10", "--size", "100", "--seed", seed])).unwrap()
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    let per: Vec<f64> = a["per_dataset"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(per.len(), 10);
    let mean = per.iter().sum::<f64>() / 10.0;
    assert!((a["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    let (lo, hi) = (a["ci"]["low"].as_f64().unwrap(), a["ci"]["high"].as_f64().unwrap());
    assert!(lo <= mean && mean <= hi, "{a}");

    // an expert model audited against itself always agrees
    let same: Value = serde_json::from_str(&ok(&["foil-audit", "--expert", s(&expert), "--human", s(&expert), "--datasets", "3", "--size", "50"])).unwrap();
    assert_eq!(same["mean"], 1.0);
}
