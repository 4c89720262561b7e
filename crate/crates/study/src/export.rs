//! Flat CSV exports for analysis. These carry ground truth and AI
//! correctness, so they are for operators only.

use std::path::{Path, PathBuf};

use cef_core::recommender::FoilSource;
use serde::{Deserialize, Serialize};

use crate::condition::{Block, Condition};
use crate::error::{Result, StudyError};
use crate::instruments::{Instrument, Instruments};
use crate::session::{SessionStatus, StudySession};

pub const TRIALS_FILE: &str = "trials.csv";
pub const QUESTIONNAIRES_FILE: &str = "questionnaires.csv";
pub const SESSIONS_FILE: &str = "sessions.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub condition: Condition,
    pub block: Block,
    pub trial: usize,
    pub block_trial: usize,
    pub character_id: String,
    pub ground_truth: String,
    pub fact: Option<String>,
    pub foil: Option<String>,
    pub foil_source: Option<FoilSource>,
    /// The shown foil, or for unilateral trials the one a predicted-foil
    /// condition would have shown.
    pub reference_foil: Option<String>,
    pub ai_correct: Option<bool>,
    pub initial_answer: Option<String>,
    pub initial_rt_ms: Option<u64>,
    pub initial_expert_rank: Option<usize>,
    pub answer: String,
    pub correct: bool,
    pub rt_ms: u64,
    /// 1 for the expert model's first choice.
    pub expert_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireRow {
    pub session_id: String,
    pub condition: Condition,
    pub instrument: Instrument,
    pub item: String,
    pub construct: Option<String>,
    pub reverse: bool,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRow {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub condition: Condition,
    pub status: SessionStatus,
    pub rng_seed: u64,
    pub created_at_ms: i64,
    pub completed_at_ms: Option<i64>,
    pub exclusion_reason: Option<String>,
}

/// One row per finalized trial.
pub fn trial_rows(sessions: &[StudySession]) -> Vec<TrialRow> {
    let mut rows = Vec::new();
    for s in sessions {
        for t in &s.trials {
            let (Some(shown), Some(answer)) = (&t.shown, &t.final_answer) else {
                continue;
            };
            let rec = t.recommendation();
            let rank_of = |choice: &str| {
                shown
                    .expert_ranking
                    .iter()
                    .position(|e| e == choice)
                    .map_or(shown.expert_ranking.len() + 1, |p| p + 1)
            };
            rows.push(TrialRow {
                session_id: s.session_id.clone(),
                participant_id: s.participant_id.clone(),
                condition: s.condition,
                block: t.planned.block,
                trial: t.planned.index,
                block_trial: t.planned.block_index,
                character_id: t.planned.character_id.clone(),
                ground_truth: shown.ground_truth().to_string(),
                fact: rec.map(|r| r.fact_id.clone()),
                foil: rec.and_then(|r| r.foil_id.clone()),
                foil_source: rec.map(|r| r.foil_source),
                reference_foil: rec.and_then(|r| r.foil_id.clone()).or_else(|| shown.reference_foil.clone()),
                ai_correct: rec.map(|r| r.ai_is_correct),
                initial_answer: t.initial.as_ref().map(|a| a.exercise_id.clone()),
                initial_rt_ms: t.initial.as_ref().map(|a| a.rt_ms),
                initial_expert_rank: t.initial.as_ref().map(|a| rank_of(&a.exercise_id)),
                answer: answer.exercise_id.clone(),
                correct: t.correct.unwrap_or(false),
                rt_ms: answer.rt_ms,
                expert_rank: rank_of(&answer.exercise_id),
            });
        }
    }
    rows
}

pub fn questionnaire_rows(sessions: &[StudySession], instruments: &Instruments) -> Vec<QuestionnaireRow> {
    let mut rows = Vec::new();
    for s in sessions {
        for (instrument, responses) in &s.questionnaires {
            let def = instruments.get(*instrument);
            for item in &def.items {
                let value = responses
                    .likert
                    .get(&item.id)
                    .map(|v| v.to_string())
                    .or_else(|| responses.values.get(&item.id).cloned());
                let Some(value) = value else { continue };
                rows.push(QuestionnaireRow {
                    session_id: s.session_id.clone(),
                    condition: s.condition,
                    instrument: *instrument,
                    item: item.id.clone(),
                    construct: item.construct.clone(),
                    reverse: item.reverse,
                    value,
                });
            }
        }
    }
    rows
}

pub fn session_rows(sessions: &[StudySession]) -> Vec<SessionRow> {
    sessions
        .iter()
        .map(|s| SessionRow {
            session_id: s.session_id.clone(),
            participant_id: s.participant_id.clone(),
            condition: s.condition,
            status: s.status,
            rng_seed: s.rng_seed,
            created_at_ms: s.created_at_ms,
            completed_at_ms: s.completed_at_ms,
            exclusion_reason: s.exclusion_reason.clone(),
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    // serialize() only emits a header with the first row
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => StudyError::io(path, io),
        other => StudyError::Corruption(format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| StudyError::io(path, e))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => StudyError::io(path, io),
        other => StudyError::Corruption(format!("{other:?}")),
    })?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub trials: PathBuf,
    pub questionnaires: PathBuf,
    pub sessions: PathBuf,
}

/// Write `trials.csv`, `questionnaires.csv` and `sessions.csv` into `dir`.
pub fn write_exports(dir: impl AsRef<Path>, sessions: &[StudySession], instruments: &Instruments) -> Result<ExportPaths> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| StudyError::io(dir, e))?;
    let paths = ExportPaths {
        trials: dir.join(TRIALS_FILE),
        questionnaires: dir.join(QUESTIONNAIRES_FILE),
        sessions: dir.join(SESSIONS_FILE),
    };
    write_csv(&paths.trials, &trial_rows(sessions))?;
    write_csv(&paths.questionnaires, &questionnaire_rows(sessions, instruments))?;
    write_csv(&paths.sessions, &session_rows(sessions))?;
    Ok(paths)
}
