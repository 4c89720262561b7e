#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use cef_study::clock::StepClock;
use cef_study::context::StudyContext;
use cef_study::engine::{CreateSession, Engine, QuestionnaireSubmission, SessionCreated};
use cef_study::instruments::{Instrument, ItemKind};
use cef_study::store::{EventStore, MemoryStore};
use cef_study::Condition;
use serde_json::{json, Value};

pub fn context(seed: u64) -> Arc<StudyContext> {
    Arc::new(StudyContext::bundled(seed).unwrap())
}

pub fn engine_with(ctx: Arc<StudyContext>, store: Arc<dyn EventStore>) -> Engine {
    Engine::open(ctx, store, Arc::new(StepClock::new(1_760_000_000_000, 1_000))).unwrap()
}

pub fn engine(seed: u64) -> Engine {
    engine_with(context(seed), Arc::new(MemoryStore::new()))
}

/// A complete, valid submission with every Likert item set to `likert`.
pub fn answers(ctx: &StudyContext, instrument: Instrument, condition: Condition, likert: u8) -> QuestionnaireSubmission {
    let items: BTreeMap<String, Value> = ctx
        .instruments
        .get(instrument)
        .items_for(condition)
        .map(|item| {
            let v = match &item.kind {
                ItemKind::Likert => json!(likert),
                ItemKind::Integer { min, .. } => json!(*min + 10),
                ItemKind::Text => json!("n/a"),
            };
            (item.id.clone(), v)
        })
        .collect();
    QuestionnaireSubmission { instrument, items }
}

/// Create a session and answer its pre-task questionnaires.
pub fn start(engine: &Engine, condition: Condition, seed: u64) -> SessionCreated {
    let created = engine
        .create_session(CreateSession {
            participant_id: Some(format!("p{seed}")),
            condition: Some(condition),
            seed: Some(seed),
        })
        .unwrap();
    for i in &created.pending_instruments {
        engine
            .record_questionnaire(&created.session_id, answers(engine.context(), *i, condition, 3))
            .unwrap();
    }
    created
}
