//! Scripted participants for exercising the pipeline end to end.

use std::fmt;
use std::str::FromStr;

use cef_core::domain::{rank_exercises, CharacterRep};
use cef_core::recommender::softmax_scores;
use cef_core::seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::condition::Condition;
use crate::engine::{CreateSession, Engine, NextStep, QuestionnaireSubmission, SubmitAnswer};
use crate::error::{Result, StudyError};
use crate::event::AnswerPhase;
use crate::instruments::{Instrument, ItemKind};
use crate::session::{TaskView, TrialView};

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_LEARNING_RATE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BotPolicy {
    /// Takes the AI recommendation whenever one is shown.
    AlwaysAi,
    /// Always answers with the human model's top choice.
    NeverAi,
    /// Samples from a softmax over human-model scores.
    HumanModelFollower { temperature: f64 },
    /// Follows the AI, but after each assisted trial is more likely to answer
    /// with the expert choice on its own.
    NoisyLearner { rate: f64 },
}

impl BotPolicy {
    pub const NAMES: [&'static str; 4] = ["always_ai", "never_ai", "human_model_follower", "noisy_learner"];

    pub fn name(&self) -> &'static str {
        match self {
            BotPolicy::AlwaysAi => "always_ai",
            BotPolicy::NeverAi => "never_ai",
            BotPolicy::HumanModelFollower { .. } => "human_model_follower",
            BotPolicy::NoisyLearner { .. } => "noisy_learner",
        }
    }
}

impl fmt::Display for BotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BotPolicy {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "always_ai" => BotPolicy::AlwaysAi,
            "never_ai" => BotPolicy::NeverAi,
            "human_model_follower" => BotPolicy::HumanModelFollower {
                temperature: DEFAULT_TEMPERATURE,
            },
            "noisy_learner" => BotPolicy::NoisyLearner {
                rate: DEFAULT_LEARNING_RATE,
            },
            other => return Err(StudyError::validation("bot_policy", format!("unknown policy `{other}`"))),
        })
    }
}

struct Bot<'a> {
    engine: &'a Engine,
    policy: BotPolicy,
    rng: ChaCha8Rng,
    assisted_seen: usize,
}

impl Bot<'_> {
    fn top(&self, x: &CharacterRep, expert: bool) -> Result<String> {
        let ctx = self.engine.context();
        let model = if expert {
            &ctx.expert
        } else {
            ctx.human.as_ref().ok_or(StudyError::MissingModel("human"))?
        };
        Ok(rank_exercises(x, ctx.dropdown(), model)?.remove(0).0)
    }

    fn sample_human(&mut self, x: &CharacterRep, temperature: f64) -> Result<String> {
        let ctx = self.engine.context();
        let human = ctx.human.as_ref().ok_or(StudyError::MissingModel("human"))?;
        let probs = softmax_scores(x, ctx.dropdown(), human, temperature);
        let mut u: f64 = self.rng.random();
        for (p, (id, _)) in probs.iter().zip(ctx.dropdown()) {
            if u < *p {
                return Ok(id.clone());
            }
            u -= p;
        }
        Ok(ctx.dropdown().last().expect("non-empty drop-down").0.clone())
    }

    /// Unassisted answer.
    fn own_choice(&mut self, x: &CharacterRep) -> Result<String> {
        match self.policy {
            BotPolicy::AlwaysAi | BotPolicy::NeverAi => self.top(x, false),
            BotPolicy::HumanModelFollower { temperature } => self.sample_human(x, temperature),
            BotPolicy::NoisyLearner { rate } => {
                let p = 1.0 - (1.0 - rate).powi(self.assisted_seen as i32);
                let learned = self.rng.random::<f64>() < p;
                self.top(x, learned)
            }
        }
    }

    fn final_choice(&mut self, own: String, recommendation: Option<&str>) -> String {
        match (self.policy, recommendation) {
            (BotPolicy::AlwaysAi, Some(fact)) => fact.to_string(),
            (BotPolicy::NoisyLearner { rate }, Some(fact)) => {
                let p = 1.0 - (1.0 - rate).powi(self.assisted_seen as i32);
                if self.rng.random::<f64>() < p {
                    own
                } else {
                    fact.to_string()
                }
            }
            _ => own,
        }
    }

    fn rt(&mut self) -> u64 {
        self.rng.random_range(4_500..40_000)
    }

    fn questionnaire(&mut self, instrument: Instrument, condition: Condition) -> QuestionnaireSubmission {
        let ctx = self.engine.context();
        let def = ctx.instruments.get(instrument);
        let max = ctx.instruments.scale_max;
        let items = def
            .items_for(condition)
            .map(|item| {
                let v: Value = match &item.kind {
                    ItemKind::Likert => json!(self.rng.random_range(1..=max)),
                    ItemKind::Integer { min, max } => json!(self.rng.random_range(*min.max(&18)..=*max.min(&80))),
                    ItemKind::Text => json!("prefer not to say"),
                };
                (item.id.clone(), v)
            })
            .collect();
        QuestionnaireSubmission { instrument, items }
    }

    fn trial(&mut self, id: &str, view: &TrialView) -> Result<NextStep> {
        let x = self.engine.context().character(&view.character_id)?.rep;
        let own = self.own_choice(&x)?;
        let mut support = view.ai.clone();
        if view.phase == AnswerPhase::Initial {
            let ack = self.engine.submit_answer(
                id,
                SubmitAnswer {
                    trial: view.index,
                    phase: AnswerPhase::Initial,
                    exercise_id: own.clone(),
                    rt_ms: self.rt(),
                },
            )?;
            support = ack.ai;
        }
        let answer = self.final_choice(own, support.as_ref().map(|s| s.recommendation.as_str()));
        if support.is_some() {
            self.assisted_seen += 1;
        }
        let ack = self.engine.submit_answer(
            id,
            SubmitAnswer {
                trial: view.index,
                phase: AnswerPhase::Final,
                exercise_id: answer,
                rt_ms: self.rt(),
            },
        )?;
        Ok(ack.next)
    }
}

/// Walk one session from creation to completion; returns its id.
pub fn run_bot(engine: &Engine, policy: BotPolicy, condition: Option<Condition>, participant_id: impl Into<String>, bot_seed: u64) -> Result<String> {
    let created = engine.create_session(CreateSession {
        participant_id: Some(participant_id.into()),
        condition,
        seed: Some(bot_seed),
    })?;
    let id = created.session_id;
    let mut bot = Bot {
        engine,
        policy,
        rng: seed::rng(seed::derive(bot_seed, 0xB07)),
        assisted_seen: 0,
    };
    loop {
        let next = match engine.next_task(&id)? {
            TaskView::PreTask { pending_instruments, .. } | TaskView::PostTask { pending_instruments, .. } => {
                let mut next = NextStep::PreTask;
                for instrument in pending_instruments {
                    let sub = bot.questionnaire(instrument, created.condition);
                    next = engine.record_questionnaire(&id, sub)?.next;
                }
                next
            }
            TaskView::Trial { trial, .. } => bot.trial(&id, &trial)?,
        };
        if next == NextStep::Completed {
            return Ok(id);
        }
    }
}
