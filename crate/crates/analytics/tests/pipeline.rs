//! Bots through the engine, exports and analysis, checked against a recount
//! straight from the raw event log.

use std::collections::BTreeMap;
use std::sync::Arc;

use cef_analytics::report::{analyze, load_study, AnalysisOptions};
use cef_study::bots::{run_bot, BotPolicy};
use cef_study::clock::StepClock;
use cef_study::context::StudyContext;
use cef_study::export::write_exports;
use cef_study::store::NdjsonStore;
use cef_study::{Condition, Engine};
use serde_json::Value;

const POLICIES: [&str; 4] = ["always_ai", "never_ai", "human_model_follower", "noisy_learner"];
const SEEDS: [u64; 2] = [11, 12];

#[derive(Debug, Default)]
struct Recount {
    condition: String,
    correct: [Vec<bool>; 3],
    wrong_ai: usize,
    adopted: usize,
    rts: Vec<f64>,
}

fn block_of(trial: u64) -> usize {
    match trial {
        0..5 => 0,
        5..19 => 1,
        _ => 2,
    }
}

/// Per-session counts computed from the NDJSON log as untyped JSON.
fn recount(path: &std::path::Path) -> BTreeMap<String, Recount> {
    let mut out: BTreeMap<String, Recount> = BTreeMap::new();
    let mut facts: BTreeMap<(String, u64), (String, bool)> = BTreeMap::new();
    for line in std::fs::read_to_string(path).unwrap().lines() {
        let e: Value = serde_json::from_str(line).unwrap();
        let sid = e["session_id"].as_str().unwrap().to_string();
        let p = &e["payload"];
        let s = out.entry(sid.clone()).or_default();
        match e["kind"].as_str().unwrap() {
            "created" => s.condition = p["condition"].as_str().unwrap().to_string(),
            "trial_shown" | "explanation_shown" => {
                if let Some(rec) = p.get("recommendation") {
                    let key = (sid, p["trial"].as_u64().unwrap());
                    facts.insert(key, (rec["fact_id"].as_str().unwrap().to_string(), rec["ai_is_correct"].as_bool().unwrap()));
                }
            }
            "initial_answer" => s.rts.push(p["rt_ms"].as_u64().unwrap() as f64),
            "final_answer" => {
                let trial = p["trial"].as_u64().unwrap();
                s.rts.push(p["rt_ms"].as_u64().unwrap() as f64);
                s.correct[block_of(trial)].push(p["correct"].as_bool().unwrap());
                if let Some((fact, ai_ok)) = facts.get(&(sid, trial)) {
                    if block_of(trial) == 1 && !ai_ok {
                        s.wrong_ai += 1;
                        s.adopted += usize::from(p["exercise_id"].as_str().unwrap() == fact);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn share(v: &[bool]) -> f64 {
    v.iter().filter(|b| **b).count() as f64 / v.len() as f64
}

fn simulate(dir: &std::path::Path) -> (Arc<StudyContext>, Engine) {
    let ctx = Arc::new(StudyContext::bundled(5).unwrap());
    let store = Arc::new(NdjsonStore::open(dir).unwrap().without_sync());
    let engine = Engine::open(ctx.clone(), store, Arc::new(StepClock::new(1_760_000_000_000, 1_000))).unwrap();
    for policy in POLICIES {
        let policy: BotPolicy = policy.parse().unwrap();
        for condition in Condition::ALL {
            for seed in SEEDS {
                run_bot(&engine, policy, Some(condition), format!("{policy}-{condition}-{seed}"), seed).unwrap();
            }
        }
    }
    (ctx, engine)
}

#[test]
fn analysis_matches_event_recount() {
    let tmp = tempfile::tempdir().unwrap();
    let (events_dir, export_dir) = (tmp.path().join("events"), tmp.path().join("exports"));
    let (ctx, engine) = simulate(&events_dir);
    write_exports(&export_dir, &engine.sessions(), &ctx.instruments).unwrap();

    let from_csv = load_study(&export_dir, &ctx.instruments).unwrap();
    let from_log = load_study(&events_dir, &ctx.instruments).unwrap();
    assert_eq!(from_csv, from_log);

    let opts = AnalysisOptions::default();
    let report = analyze(&from_csv, &ctx.instruments, &opts).unwrap();
    let expected = recount(&events_dir.join("events.ndjson"));
    assert_eq!(report.participants.len(), expected.len());
    assert_eq!(report.summary.n_sessions, POLICIES.len() * 5 * SEEDS.len());

    for p in &report.participants {
        let r = &expected[&p.session_id];
        assert_eq!(p.condition.name(), r.condition);
        assert_eq!(r.correct.iter().map(Vec::len).collect::<Vec<_>>(), [5, 14, 5]);
        assert!((p.pre_mean - share(&r.correct[0])).abs() < 1e-12);
        assert!((p.intervention_mean - share(&r.correct[1])).abs() < 1e-12);
        assert!((p.post_mean - share(&r.correct[2])).abs() < 1e-12);
        let or = (p.condition != Condition::NoAi && r.wrong_ai > 0).then(|| r.adopted as f64 / r.wrong_ai as f64);
        assert_eq!(p.overreliance.is_some(), or.is_some());
        if let (Some(a), Some(b)) = (p.overreliance, or) {
            assert!((a - b).abs() < 1e-12, "{}: {a} vs {b}", p.session_id);
        }
        assert!((p.mean_rt_ms - r.rts.iter().sum::<f64>() / r.rts.len() as f64).abs() < 1e-9);
    }

    // condition summaries over included participants
    for c in &report.summary.conditions {
        let included: Vec<_> = report.participants.iter().filter(|p| p.condition == c.condition && p.included()).collect();
        assert_eq!(c.n, included.len());
        let want = included.iter().map(|p| share(&expected[&p.session_id].correct[2])).sum::<f64>() / included.len() as f64;
        assert!((c.learning.as_ref().unwrap().mean - want).abs() < 1e-12);
    }

    // always_ai follows every suggestion, never_ai only by coincidence
    for p in report.participants.iter().filter(|p| p.participant_id.as_deref().is_some_and(|id| id.starts_with("always_ai"))) {
        if let Some(o) = p.overreliance {
            assert_eq!(o, 1.0, "{}", p.session_id);
        }
    }
    assert!(report.summary.learning.is_some(), "{:?}", report.summary.skipped);
}

#[test]
fn never_ai_answers_do_not_depend_on_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let (_ctx, engine) = simulate(tmp.path());
    let expected = recount(&tmp.path().join("events.ndjson"));
    let sessions = engine.sessions();
    for seed in SEEDS {
        let runs: Vec<&Recount> = sessions
            .iter()
            .filter(|s| s.participant_id.as_deref().is_some_and(|id| id.starts_with("never_ai") && id.ends_with(&format!("-{seed}"))))
            .map(|s| &expected[&s.session_id])
            .collect();
        assert_eq!(runs.len(), 5);
        for r in &runs[1..] {
            assert_eq!(r.correct, runs[0].correct, "seed {seed}: {} vs {}", r.condition, runs[0].condition);
        }
    }
}

#[test]
fn report_files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (ctx, _engine) = simulate(&tmp.path().join("events"));
    let data = load_study(tmp.path().join("events"), &ctx.instruments).unwrap();
    let report = analyze(&data, &ctx.instruments, &AnalysisOptions::default()).unwrap();
    let out = tmp.path().join("report");
    let files = cef_analytics::report::write_report(&out, &report).unwrap();
    assert!(files.iter().all(|f| f.exists()));

    let rows: Vec<cef_analytics::report::ParticipantRow> = cef_study::export::read_csv(&out.join("participants.csv")).unwrap();
    assert_eq!(rows.len(), report.participants.len());
    for (row, p) in rows.iter().zip(&report.participants) {
        assert_eq!(row.session_id, p.session_id);
        assert_eq!(row.post_mean, p.post_mean);
        assert_eq!(row.included, p.included());
    }
    let text = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(text.ends_with('\n'));
    let summary: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(summary["n_sessions"], 40);
    assert!(summary["learning"]["contrasts"].as_array().is_some_and(|c| c.len() == 6));

    // same input, same bytes
    let again = tmp.path().join("again");
    cef_analytics::report::write_report(&again, &analyze(&data, &ctx.instruments, &AnalysisOptions::default()).unwrap()).unwrap();
    assert_eq!(text, std::fs::read_to_string(again.join("summary.json")).unwrap());
}

#[test]
fn empty_directory_has_no_sessions() {
    let tmp = tempfile::tempdir().unwrap();
    let err = load_study(tmp.path(), &cef_study::instruments::Instruments::bundled()).unwrap_err();
    assert!(err.to_string().starts_with("no sessions found in"), "{err}");
}
