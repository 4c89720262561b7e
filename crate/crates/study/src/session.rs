//! Session state derived from the event log.

use std::collections::BTreeMap;

use cef_core::explain::{ExplanationDoc, Presented};
use cef_core::recommender::{ErrorSchedule, Recommendation};
use serde::{Deserialize, Serialize};

use crate::condition::{Block, Condition, TOTAL_TRIALS};
use crate::context::PlannedTrial;
use crate::error::{Result, StudyError};
use crate::event::{AnswerPhase, EventBody, SessionEvent};
use crate::instruments::{Instrument, Responses};

/// Label shown next to a model-predicted or randomly drawn foil.
pub const POPULAR_FOIL_LABEL: &str = "Many people would choose";
/// Label shown next to the participant's own first answer.
pub const OWN_FOIL_LABEL: &str = "Your choice";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
    Excluded,
}

/// Where a session is in its flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    PreTask,
    Trial(usize),
    PostTask,
    /// All instruments and trials recorded, completion not yet logged.
    Finished,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownTrial {
    pub vignette: String,
    pub dropdown: Vec<String>,
    pub expert_ranking: Vec<String>,
    pub recommendation: Option<Recommendation>,
    pub explanation: Option<Presented>,
    pub reference_foil: Option<String>,
    pub shown_at_ms: i64,
}

impl ShownTrial {
    pub fn ground_truth(&self) -> &str {
        &self.expert_ranking[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub exercise_id: String,
    pub rt_ms: u64,
    pub at_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revealed {
    pub recommendation: Recommendation,
    pub explanation: Presented,
    pub at_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub planned: PlannedTrial,
    pub shown: Option<ShownTrial>,
    pub initial: Option<Answer>,
    pub revealed: Option<Revealed>,
    pub final_answer: Option<Answer>,
    pub correct: Option<bool>,
}

impl TrialState {
    /// The recommendation as it stands after any participant-supplied foil.
    pub fn recommendation(&self) -> Option<&Recommendation> {
        self.revealed
            .as_ref()
            .map(|r| &r.recommendation)
            .or_else(|| self.shown.as_ref()?.recommendation.as_ref())
    }

    pub fn explanation(&self) -> Option<&Presented> {
        self.revealed
            .as_ref()
            .map(|r| &r.explanation)
            .or_else(|| self.shown.as_ref()?.explanation.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySession {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub condition: Condition,
    pub rng_seed: u64,
    pub token_sha256: String,
    pub error_schedule: Option<ErrorSchedule>,
    pub trials: Vec<TrialState>,
    pub questionnaires: BTreeMap<Instrument, Responses>,
    pub pre_task: Vec<Instrument>,
    pub post_task: Vec<Instrument>,
    pub status: SessionStatus,
    pub exclusion_reason: Option<String>,
    pub created_at_ms: i64,
    pub completed_at_ms: Option<i64>,
    pub next_sequence: u64,
}

fn protocol(msg: impl Into<String>) -> StudyError {
    StudyError::Protocol(msg.into())
}

impl StudySession {
    /// State after the `created` event.
    pub fn from_created(e: &SessionEvent) -> Result<Self> {
        let EventBody::Created {
            participant_id,
            condition,
            rng_seed,
            token_sha256,
            plan,
            error_schedule,
            pre_task,
            post_task,
        } = &e.body
        else {
            return Err(StudyError::Corruption(format!("log starts with {}", e.body.kind())));
        };
        if e.sequence_no != 0 {
            return Err(StudyError::Corruption(format!("first event has sequence {}", e.sequence_no)));
        }
        if plan.len() != TOTAL_TRIALS {
            return Err(StudyError::Corruption(format!("plan has {} trials", plan.len())));
        }
        if condition.has_ai() != error_schedule.is_some() {
            return Err(StudyError::Corruption("error schedule does not match condition".into()));
        }
        Ok(StudySession {
            session_id: e.session_id.clone(),
            participant_id: participant_id.clone(),
            condition: *condition,
            rng_seed: *rng_seed,
            token_sha256: token_sha256.clone(),
            error_schedule: error_schedule.clone(),
            trials: plan
                .iter()
                .map(|p| TrialState {
                    planned: p.clone(),
                    shown: None,
                    initial: None,
                    revealed: None,
                    final_answer: None,
                    correct: None,
                })
                .collect(),
            questionnaires: BTreeMap::new(),
            pre_task: pre_task.clone(),
            post_task: post_task.clone(),
            status: SessionStatus::Active,
            exclusion_reason: None,
            created_at_ms: e.timestamp_ms,
            completed_at_ms: None,
            next_sequence: 1,
        })
    }

    pub fn finalized_count(&self) -> usize {
        self.trials.iter().take_while(|t| t.final_answer.is_some()).count()
    }

    pub fn pending(&self, instruments: &[Instrument]) -> Vec<Instrument> {
        instruments
            .iter()
            .copied()
            .filter(|i| !self.questionnaires.contains_key(i))
            .collect()
    }

    pub fn stage(&self) -> Stage {
        if self.status != SessionStatus::Active {
            return Stage::Closed;
        }
        if !self.pending(&self.pre_task).is_empty() {
            return Stage::PreTask;
        }
        let done = self.finalized_count();
        if done < self.trials.len() {
            return Stage::Trial(done);
        }
        if !self.pending(&self.post_task).is_empty() {
            return Stage::PostTask;
        }
        Stage::Finished
    }

    /// Intervention trials of the two-phase condition need a first answer.
    pub fn needs_initial(&self, trial: usize) -> bool {
        self.condition.is_two_phase() && self.trials[trial].planned.block == Block::Intervention
    }

    pub fn phase(&self, trial: usize) -> AnswerPhase {
        if self.needs_initial(trial) && self.trials[trial].initial.is_none() {
            AnswerPhase::Initial
        } else {
            AnswerPhase::Final
        }
    }

    fn current_trial(&self, trial: usize) -> Result<&TrialState> {
        match self.stage() {
            Stage::Closed => Err(StudyError::Completed(self.session_id.clone())),
            Stage::PreTask => Err(protocol(format!(
                "pre-task questionnaires pending: {}",
                names(&self.pending(&self.pre_task))
            ))),
            Stage::Trial(current) if current == trial => Ok(&self.trials[trial]),
            Stage::Trial(current) if trial < current => Err(protocol(format!("trial {trial} is already finalized"))),
            Stage::Trial(current) => Err(protocol(format!("trial {trial} is not the current trial ({current})"))),
            Stage::PostTask | Stage::Finished => Err(protocol(format!("trial {trial} is already finalized"))),
        }
    }

    fn shown_trial(&self, trial: usize) -> Result<(&TrialState, &ShownTrial)> {
        let t = self.current_trial(trial)?;
        let shown = t
            .shown
            .as_ref()
            .ok_or_else(|| protocol(format!("trial {trial} has not been shown yet")))?;
        Ok((t, shown))
    }

    fn check_choice(shown: &ShownTrial, exercise_id: &str) -> Result<()> {
        if shown.dropdown.iter().any(|d| d == exercise_id) {
            Ok(())
        } else {
            Err(StudyError::validation("exercise_id", format!("`{exercise_id}` is not in the drop-down")))
        }
    }

    /// Would `body` be a legal next event?
    pub fn check(&self, body: &EventBody) -> Result<()> {
        match body {
            EventBody::Created { .. } => Err(protocol("session already exists")),
            EventBody::TrialShown { trial, character_id, .. } => {
                let t = self.current_trial(*trial)?;
                if t.shown.is_some() {
                    return Err(protocol(format!("trial {trial} was already shown")));
                }
                if &t.planned.character_id != character_id {
                    return Err(protocol(format!("trial {trial} is planned for {}", t.planned.character_id)));
                }
                Ok(())
            }
            EventBody::InitialAnswer { trial, exercise_id, .. } => {
                let (t, shown) = self.shown_trial(*trial)?;
                if !self.needs_initial(*trial) {
                    return Err(protocol(format!("trial {trial} takes a single final answer")));
                }
                if t.initial.is_some() {
                    return Err(protocol(format!("trial {trial} already has an initial answer")));
                }
                Self::check_choice(shown, exercise_id)
            }
            EventBody::ExplanationShown { trial, .. } => {
                let (t, _) = self.shown_trial(*trial)?;
                if t.initial.is_none() {
                    return Err(protocol(format!("trial {trial}: explanation before initial answer")));
                }
                if t.revealed.is_some() {
                    return Err(protocol(format!("trial {trial}: explanation already shown")));
                }
                Ok(())
            }
            EventBody::FinalAnswer {
                trial,
                exercise_id,
                correct,
                ..
            } => {
                let (t, shown) = self.shown_trial(*trial)?;
                if self.needs_initial(*trial) && (t.initial.is_none() || t.revealed.is_none()) {
                    return Err(protocol(format!("trial {trial} needs an initial answer first")));
                }
                Self::check_choice(shown, exercise_id)?;
                if *correct != (exercise_id == shown.ground_truth()) {
                    return Err(protocol("correctness flag disagrees with the ground truth"));
                }
                Ok(())
            }
            EventBody::Questionnaire { instrument, .. } => {
                if self.status != SessionStatus::Active {
                    return Err(StudyError::Completed(self.session_id.clone()));
                }
                if self.questionnaires.contains_key(instrument) {
                    return Err(protocol(format!("{instrument} was already recorded")));
                }
                let stage = self.stage();
                if self.pre_task.contains(instrument) {
                    if stage != Stage::PreTask {
                        return Err(protocol(format!("{instrument} is a pre-task questionnaire")));
                    }
                } else if self.post_task.contains(instrument) {
                    if stage != Stage::PostTask {
                        return Err(protocol(format!("{instrument} is asked after all trials")));
                    }
                } else {
                    return Err(protocol(format!("{instrument} is not part of this study")));
                }
                Ok(())
            }
            EventBody::Completed {} => match self.stage() {
                Stage::Finished => Ok(()),
                Stage::Closed => Err(StudyError::Completed(self.session_id.clone())),
                _ => Err(protocol("session still has open steps")),
            },
            EventBody::Excluded { .. } => {
                if self.status == SessionStatus::Excluded {
                    Err(protocol("session is already excluded"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Fold one more event into the state.
    pub fn apply(&mut self, e: &SessionEvent) -> Result<()> {
        if e.session_id != self.session_id {
            return Err(StudyError::Corruption(format!(
                "event for {} in log of {}",
                e.session_id, self.session_id
            )));
        }
        if e.sequence_no != self.next_sequence {
            return Err(StudyError::Corruption(format!(
                "sequence gap: expected {}, found {}",
                self.next_sequence, e.sequence_no
            )));
        }
        self.check(&e.body)?;
        let at = e.timestamp_ms;
        match &e.body {
            EventBody::Created { .. } => unreachable!("rejected by check"),
            EventBody::TrialShown {
                trial,
                vignette,
                dropdown,
                expert_ranking,
                recommendation,
                explanation,
                reference_foil,
                ..
            } => {
                if expert_ranking.is_empty() {
                    return Err(StudyError::Corruption("empty expert ranking".into()));
                }
                self.trials[*trial].shown = Some(ShownTrial {
                    vignette: vignette.clone(),
                    dropdown: dropdown.clone(),
                    expert_ranking: expert_ranking.clone(),
                    recommendation: recommendation.clone(),
                    explanation: explanation.clone(),
                    reference_foil: reference_foil.clone(),
                    shown_at_ms: at,
                });
            }
            EventBody::InitialAnswer {
                trial,
                exercise_id,
                rt_ms,
            } => {
                self.trials[*trial].initial = Some(Answer {
                    exercise_id: exercise_id.clone(),
                    rt_ms: *rt_ms,
                    at_ms: at,
                });
            }
            EventBody::ExplanationShown {
                trial,
                recommendation,
                explanation,
            } => {
                self.trials[*trial].revealed = Some(Revealed {
                    recommendation: recommendation.clone(),
                    explanation: explanation.clone(),
                    at_ms: at,
                });
            }
            EventBody::FinalAnswer {
                trial,
                exercise_id,
                rt_ms,
                correct,
            } => {
                let t = &mut self.trials[*trial];
                t.final_answer = Some(Answer {
                    exercise_id: exercise_id.clone(),
                    rt_ms: *rt_ms,
                    at_ms: at,
                });
                t.correct = Some(*correct);
            }
            EventBody::Questionnaire { instrument, responses } => {
                self.questionnaires.insert(*instrument, responses.clone());
            }
            EventBody::Completed {} => {
                self.status = SessionStatus::Completed;
                self.completed_at_ms = Some(at);
            }
            EventBody::Excluded { reason } => {
                self.status = SessionStatus::Excluded;
                self.exclusion_reason = Some(reason.clone());
            }
        }
        self.next_sequence += 1;
        Ok(())
    }

    /// What the participant currently sees from the AI on `trial`, if anything.
    pub fn support(&self, trial: usize) -> Option<AiSupport> {
        let t = &self.trials[trial];
        if !self.condition.has_ai() || t.planned.block != Block::Intervention {
            return None;
        }
        if self.needs_initial(trial) && t.revealed.is_none() {
            return None;
        }
        let rec = t.recommendation()?;
        let label = if self.condition.is_two_phase() {
            OWN_FOIL_LABEL
        } else {
            POPULAR_FOIL_LABEL
        };
        Some(AiSupport {
            recommendation: rec.fact_id.clone(),
            foil: rec.foil_id.as_ref().map(|f| FoilView {
                exercise_id: f.clone(),
                label: label.to_string(),
            }),
            explanation: t.explanation()?.doc.clone(),
        })
    }

    fn trial_view(&self, trial: usize) -> Option<TrialView> {
        let t = &self.trials[trial];
        let shown = t.shown.as_ref()?;
        Some(TrialView {
            index: trial,
            total: self.trials.len(),
            block: t.planned.block,
            block_index: t.planned.block_index,
            block_size: t.planned.block.size(),
            character_id: t.planned.character_id.clone(),
            vignette: shown.vignette.clone(),
            dropdown: shown.dropdown.clone(),
            phase: self.phase(trial),
            initial_answer: t.initial.as_ref().map(|a| a.exercise_id.clone()),
            ai: self.support(trial),
        })
    }

    /// Participant-facing view of the current step; `None` when the current
    /// trial still has to be shown.
    pub fn view(&self) -> Result<Option<TaskView>> {
        let session_id = self.session_id.clone();
        Ok(Some(match self.stage() {
            Stage::Closed | Stage::Finished => return Err(StudyError::Completed(session_id)),
            Stage::PreTask => TaskView::PreTask {
                session_id,
                pending_instruments: self.pending(&self.pre_task),
            },
            Stage::PostTask => TaskView::PostTask {
                session_id,
                pending_instruments: self.pending(&self.post_task),
            },
            Stage::Trial(i) => match self.trial_view(i) {
                Some(trial) => TaskView::Trial { session_id, trial },
                None => return Ok(None),
            },
        }))
    }
}

fn names(v: &[Instrument]) -> String {
    v.iter().map(|i| i.name()).collect::<Vec<_>>().join(", ")
}

/// Rebuild a session from its complete or truncated log.
pub fn replay(events: &[SessionEvent]) -> Result<StudySession> {
    let (first, rest) = events
        .split_first()
        .ok_or_else(|| StudyError::Corruption("empty log".into()))?;
    let mut s = StudySession::from_created(first)?;
    for e in rest {
        s.apply(e).map_err(|err| match err {
            StudyError::Corruption(m) => StudyError::Corruption(m),
            other => StudyError::Corruption(format!("event {}: {other}", e.sequence_no)),
        })?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoilView {
    pub exercise_id: String,
    pub label: String,
}

/// AI panel contents. Carries neither the ground truth nor the AI's correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiSupport {
    pub recommendation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foil: Option<FoilView>,
    pub explanation: ExplanationDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub index: usize,
    pub total: usize,
    pub block: Block,
    pub block_index: usize,
    pub block_size: usize,
    pub character_id: String,
    pub vignette: String,
    pub dropdown: Vec<String>,
    pub phase: AnswerPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ai: Option<AiSupport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum TaskView {
    PreTask {
        session_id: String,
        pending_instruments: Vec<Instrument>,
    },
    Trial {
        session_id: String,
        trial: TrialView,
    },
    PostTask {
        session_id: String,
        pending_instruments: Vec<Instrument>,
    },
}
