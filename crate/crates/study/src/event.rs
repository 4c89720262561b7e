//! The append-only session log.

use cef_core::explain::Presented;
use cef_core::recommender::{ErrorSchedule, Recommendation};
use serde::{Deserialize, Serialize};

use crate::condition::Condition;
use crate::context::PlannedTrial;
use crate::instruments::{Instrument, Responses};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub schema_version: u32,
    pub session_id: String,
    pub sequence_no: u64,
    /// Server time, milliseconds since the Unix epoch.
    pub timestamp_ms: i64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerPhase {
    Initial,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Created {
        participant_id: Option<String>,
        condition: Condition,
        rng_seed: u64,
        token_sha256: String,
        plan: Vec<PlannedTrial>,
        error_schedule: Option<ErrorSchedule>,
        pre_task: Vec<Instrument>,
        post_task: Vec<Instrument>,
    },
    TrialShown {
        trial: usize,
        character_id: String,
        vignette: String,
        dropdown: Vec<String>,
        /// Drop-down ids from best to worst under the expert model.
        expert_ranking: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        recommendation: Option<Recommendation>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        explanation: Option<Presented>,
        /// Unilateral trials: the foil a predicted-foil condition would have shown.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_foil: Option<String>,
    },
    InitialAnswer {
        trial: usize,
        exercise_id: String,
        rt_ms: u64,
    },
    ExplanationShown {
        trial: usize,
        recommendation: Recommendation,
        explanation: Presented,
    },
    FinalAnswer {
        trial: usize,
        exercise_id: String,
        rt_ms: u64,
        correct: bool,
    },
    Questionnaire {
        instrument: Instrument,
        responses: Responses,
    },
    Completed {},
    Excluded {
        reason: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Created { .. } => "created",
            EventBody::TrialShown { .. } => "trial_shown",
            EventBody::InitialAnswer { .. } => "initial_answer",
            EventBody::ExplanationShown { .. } => "explanation_shown",
            EventBody::FinalAnswer { .. } => "final_answer",
            EventBody::Questionnaire { .. } => "questionnaire",
            EventBody::Completed {} => "completed",
            EventBody::Excluded { .. } => "excluded",
        }
    }
}
