//! Command handling: validate, log, then apply.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use cef_core::contrast::{contrast, DEFAULT_TOL};
use cef_core::explain::Presented;
use cef_core::recommender::{recommend, ErrorSchedule, FoilSource, Models};
use cef_core::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::Clock;
use crate::condition::{Block, Condition};
use crate::context::{token_digest, StudyContext};
use crate::error::{Result, StudyError};
use crate::event::{AnswerPhase, EventBody, SessionEvent, SCHEMA_VERSION};
use crate::instruments::{Instrument, InstrumentDef, Stage as InstrumentStage};
use crate::session::{replay, AiSupport, SessionStatus, Stage, StudySession, TaskView};
use crate::store::EventStore;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub participant_id: Option<String>,
    /// `None` assigns the least-filled condition.
    #[serde(default)]
    pub condition: Option<Condition>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub token: String,
    pub condition: Condition,
    pub pending_instruments: Vec<Instrument>,
    /// Every instrument the session will ask, pre-task first.
    pub instruments: Vec<InstrumentDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitAnswer {
    pub trial: usize,
    pub phase: AnswerPhase,
    pub exercise_id: String,
    pub rt_ms: u64,
}

/// What the participant moves on to after a submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NextStep {
    PreTask,
    Trial,
    PostTask,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerAck {
    pub trial: usize,
    pub phase: AnswerPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ai: Option<AiSupport>,
    pub next: NextStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireSubmission {
    pub instrument: Instrument,
    pub items: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireAck {
    pub instrument: Instrument,
    pub next: NextStep,
}

#[derive(Default)]
struct Registry {
    order: Vec<String>,
    sessions: BTreeMap<String, Arc<Mutex<StudySession>>>,
}

/// All sessions of one study. Commands on one session are serialized; each
/// event is durable before the command returns.
pub struct Engine {
    ctx: Arc<StudyContext>,
    store: Arc<dyn EventStore>,
    clock: Arc<dyn Clock>,
    registry: RwLock<Registry>,
    create_lock: Mutex<()>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("sessions", &self.registry.read().expect("registry lock").order.len())
            .finish()
    }
}

fn next_step(s: &StudySession) -> NextStep {
    match s.stage() {
        Stage::PreTask => NextStep::PreTask,
        Stage::Trial(_) => NextStep::Trial,
        Stage::PostTask => NextStep::PostTask,
        Stage::Finished | Stage::Closed => NextStep::Completed,
    }
}

impl Engine {
    /// Rebuild every session found in `store`.
    pub fn open(ctx: Arc<StudyContext>, store: Arc<dyn EventStore>, clock: Arc<dyn Clock>) -> Result<Self> {
        let mut grouped: BTreeMap<String, Vec<SessionEvent>> = BTreeMap::new();
        let mut order = Vec::new();
        for e in store.load()? {
            if !grouped.contains_key(&e.session_id) {
                order.push(e.session_id.clone());
            }
            grouped.entry(e.session_id.clone()).or_default().push(e);
        }
        let mut sessions = BTreeMap::new();
        for (id, events) in grouped {
            sessions.insert(id, Arc::new(Mutex::new(replay(&events)?)));
        }
        Ok(Engine {
            ctx,
            store,
            clock,
            registry: RwLock::new(Registry { order, sessions }),
            create_lock: Mutex::new(()),
        })
    }

    pub fn context(&self) -> &StudyContext {
        &self.ctx
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<StudySession>>> {
        self.registry
            .read()
            .expect("registry lock")
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| StudyError::UnknownSession(id.to_string()))
    }

    fn emit(&self, s: &mut StudySession, body: EventBody) -> Result<()> {
        s.check(&body)?;
        let event = SessionEvent {
            schema_version: SCHEMA_VERSION,
            session_id: s.session_id.clone(),
            sequence_no: s.next_sequence,
            timestamp_ms: self.clock.now_ms(),
            body,
        };
        self.store.append(&event)?;
        s.apply(&event)
    }

    fn finish_if_done(&self, s: &mut StudySession) -> Result<()> {
        if s.stage() == Stage::Finished {
            self.emit(s, EventBody::Completed {})?;
        }
        Ok(())
    }

    /// Snapshot of one session.
    pub fn session(&self, id: &str) -> Result<StudySession> {
        Ok(self.handle(id)?.lock().expect("session lock").clone())
    }

    /// Snapshots of every session in creation order.
    pub fn sessions(&self) -> Vec<StudySession> {
        let reg = self.registry.read().expect("registry lock");
        reg.order
            .iter()
            .map(|id| reg.sessions[id].lock().expect("session lock").clone())
            .collect()
    }

    pub fn events(&self) -> Result<Vec<SessionEvent>> {
        self.store.load()
    }

    pub fn authorize(&self, id: &str, token: &str) -> Result<()> {
        let h = self.handle(id)?;
        let s = h.lock().expect("session lock");
        if token_digest(token) == s.token_sha256 {
            Ok(())
        } else {
            Err(StudyError::Unauthorized)
        }
    }

    fn balanced_condition(&self, reg: &Registry) -> Condition {
        let mut counts: BTreeMap<Condition, usize> = Condition::ALL.into_iter().map(|c| (c, 0)).collect();
        for s in reg.sessions.values() {
            *counts.get_mut(&s.lock().expect("session lock").condition).expect("all conditions") += 1;
        }
        let min = counts.values().copied().min().unwrap_or(0);
        let tied: Vec<Condition> = counts.into_iter().filter(|&(_, n)| n == min).map(|(c, _)| c).collect();
        let mut rng = seed::rng(seed::derive(self.ctx.study_seed ^ 0xBA1A, reg.order.len() as u64));
        tied[rng.random_range(0..tied.len())]
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionCreated> {
        let _guard = self.create_lock.lock().expect("create lock");
        let (n, condition) = {
            let reg = self.registry.read().expect("registry lock");
            let c = req.condition.unwrap_or_else(|| self.balanced_condition(&reg));
            (reg.order.len() as u64, c)
        };
        if condition.has_ai() && self.ctx.human.is_none() {
            return Err(StudyError::MissingModel("human"));
        }
        if let Some(p) = &req.participant_id {
            if p.trim().is_empty() || p.len() > 128 {
                return Err(StudyError::validation("participant_id", "must be 1..=128 bytes"));
            }
        }
        let rng_seed = req.seed.unwrap_or_else(|| seed::derive(self.ctx.study_seed, n));
        let session_id = {
            let reg = self.registry.read().expect("registry lock");
            let mut salt = n;
            loop {
                let id = format!("s{:016x}", seed::derive(rng_seed, 0x1D00 + salt));
                if !reg.sessions.contains_key(&id) {
                    break id;
                }
                salt += 1 << 32;
            }
        };
        let error_schedule = if condition.has_ai() {
            Some(match &self.ctx.fixed_error_trials {
                Some(fixed) => ErrorSchedule::fixed(fixed.iter().copied(), rng_seed)?,
                None => ErrorSchedule::draw(seed::derive(rng_seed, 0xE440)),
            })
        } else {
            None
        };
        let token = self.ctx.token_for(&session_id);
        let pre_task = self.ctx.instruments.at_stage(InstrumentStage::PreTask);
        let post_task = self.ctx.instruments.at_stage(InstrumentStage::PostTask);
        let event = SessionEvent {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.clone(),
            sequence_no: 0,
            timestamp_ms: self.clock.now_ms(),
            body: EventBody::Created {
                participant_id: req.participant_id,
                condition,
                rng_seed,
                token_sha256: token_digest(&token),
                plan: self.ctx.block_plan(rng_seed),
                error_schedule,
                pre_task: pre_task.clone(),
                post_task,
            },
        };
        let mut session = StudySession::from_created(&event)?;
        self.store.append(&event)?;
        self.finish_if_done(&mut session)?;
        let pending = session.pending(&pre_task);
        let instruments = session
            .pre_task
            .iter()
            .chain(&session.post_task)
            .map(|i| self.ctx.instruments.get(*i).clone())
            .collect();
        let mut reg = self.registry.write().expect("registry lock");
        reg.order.push(session_id.clone());
        reg.sessions.insert(session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(SessionCreated {
            session_id,
            token,
            condition,
            pending_instruments: pending,
            instruments,
        })
    }

    fn support_for(&self, s: &StudySession, trial: usize, rec: &cef_core::recommender::Recommendation) -> Result<Option<Presented>> {
        let planned = &s.trials[trial].planned;
        let character = self.ctx.character(&planned.character_id)?;
        let subject = character.subject();
        let rep = |id: &str| {
            self.ctx
                .exercise(id)
                .copied()
                .ok_or_else(|| StudyError::Core(cef_core::Error::UnknownExercise(id.to_string())))
        };
        let fact = rep(&rec.fact_id)?;
        Ok(Some(match &rec.foil_id {
            None => self.ctx.presenter.unilateral(&subject, &rec.fact_id, &fact, &self.ctx.expert)?,
            Some(foil_id) => {
                let foil = rep(foil_id)?;
                let report = contrast(
                    &character.rep,
                    (&rec.fact_id, &fact),
                    (foil_id, &foil),
                    &self.ctx.expert,
                    DEFAULT_TOL,
                )?;
                self.ctx.presenter.contrastive(&subject, &report)?
            }
        }))
    }

    fn show_trial(&self, s: &mut StudySession, trial: usize) -> Result<()> {
        let planned = s.trials[trial].planned.clone();
        let character = self.ctx.character(&planned.character_id)?;
        let expert_ranking = self.ctx.expert_ranking(&planned.character_id)?;
        let mut recommendation = None;
        let mut explanation = None;
        let mut reference_foil = None;
        if s.condition.has_ai() && planned.block == Block::Intervention {
            let human = self.ctx.human.as_ref().ok_or(StudyError::MissingModel("human"))?;
            let schedule = s.error_schedule.as_ref().expect("AI sessions carry a schedule");
            let models = Models {
                expert: &self.ctx.expert,
                human,
            };
            let rec = recommend(&character.rep, self.ctx.dropdown(), models, planned.block_index, schedule, s.condition.foil_source())?;
            if s.condition == Condition::Unilateral {
                reference_foil = recommend(&character.rep, self.ctx.dropdown(), models, planned.block_index, schedule, FoilSource::Predicted)?.foil_id;
            }
            if !s.condition.is_two_phase() {
                explanation = self.support_for(s, trial, &rec)?;
            }
            recommendation = Some(rec);
        }
        let body = EventBody::TrialShown {
            trial,
            character_id: planned.character_id.clone(),
            vignette: character.vignette.clone(),
            dropdown: self.ctx.dropdown_ids(),
            expert_ranking,
            recommendation,
            explanation,
            reference_foil,
        };
        self.emit(s, body)
    }

    /// Current step for the participant; shows the next trial if needed.
    pub fn next_task(&self, id: &str) -> Result<TaskView> {
        let h = self.handle(id)?;
        let mut s = h.lock().expect("session lock");
        if let Some(v) = s.view()? {
            return Ok(v);
        }
        let Stage::Trial(trial) = s.stage() else {
            unreachable!("only unshown trials lack a view")
        };
        self.show_trial(&mut s, trial)?;
        Ok(s.view()?.expect("trial was just shown"))
    }

    pub fn submit_answer(&self, id: &str, req: SubmitAnswer) -> Result<AnswerAck> {
        let h = self.handle(id)?;
        let mut s = h.lock().expect("session lock");
        let trial = req.trial;
        match req.phase {
            AnswerPhase::Initial => {
                self.emit(
                    &mut s,
                    EventBody::InitialAnswer {
                        trial,
                        exercise_id: req.exercise_id.clone(),
                        rt_ms: req.rt_ms,
                    },
                )?;
                let rec = s.trials[trial]
                    .shown
                    .as_ref()
                    .and_then(|t| t.recommendation.clone())
                    .ok_or_else(|| StudyError::Corruption(format!("trial {trial} has no recommendation")))?
                    .with_inputted_foil(&req.exercise_id);
                let explanation = self
                    .support_for(&s, trial, &rec)?
                    .expect("support is always produced for a recommendation");
                self.emit(
                    &mut s,
                    EventBody::ExplanationShown {
                        trial,
                        recommendation: rec,
                        explanation,
                    },
                )?;
                Ok(AnswerAck {
                    trial,
                    phase: req.phase,
                    ai: s.support(trial),
                    next: NextStep::Trial,
                })
            }
            AnswerPhase::Final => {
                let correct = s
                    .trials
                    .get(trial)
                    .and_then(|t| t.shown.as_ref())
                    .is_some_and(|shown| shown.ground_truth() == req.exercise_id);
                self.emit(
                    &mut s,
                    EventBody::FinalAnswer {
                        trial,
                        exercise_id: req.exercise_id,
                        rt_ms: req.rt_ms,
                        correct,
                    },
                )?;
                self.finish_if_done(&mut s)?;
                Ok(AnswerAck {
                    trial,
                    phase: req.phase,
                    ai: None,
                    next: next_step(&s),
                })
            }
        }
    }

    pub fn record_questionnaire(&self, id: &str, req: QuestionnaireSubmission) -> Result<QuestionnaireAck> {
        let h = self.handle(id)?;
        let mut s = h.lock().expect("session lock");
        // stage errors take precedence over item errors
        s.check(&EventBody::Questionnaire {
            instrument: req.instrument,
            responses: Default::default(),
        })?;
        let responses = self.ctx.instruments.validate(req.instrument, s.condition, &req.items)?;
        self.emit(
            &mut s,
            EventBody::Questionnaire {
                instrument: req.instrument,
                responses,
            },
        )?;
        self.finish_if_done(&mut s)?;
        Ok(QuestionnaireAck {
            instrument: req.instrument,
            next: next_step(&s),
        })
    }

    /// Mark a session as excluded from analysis.
    pub fn exclude(&self, id: &str, reason: impl Into<String>) -> Result<()> {
        let h = self.handle(id)?;
        let mut s = h.lock().expect("session lock");
        self.emit(&mut s, EventBody::Excluded { reason: reason.into() })
    }

    pub fn count_by_status(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for s in self.sessions() {
            let k = match s.status {
                SessionStatus::Active => "active",
                SessionStatus::Completed => "completed",
                SessionStatus::Excluded => "excluded",
            };
            *out.entry(k).or_default() += 1;
        }
        out
    }
}
