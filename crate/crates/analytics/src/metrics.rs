//! Per-participant objective metrics, exclusion flags and questionnaire
//! construct scores.

use std::collections::{BTreeMap, BTreeSet};

use cef_study::export::{QuestionnaireRow, TrialRow};
use cef_study::instruments::Instruments;
use cef_study::{Block, Condition};
use serde::{Deserialize, Serialize};

use crate::error::{AnalyticsError, Result};
use crate::stats::{mean, median};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionFlag {
    FastResponder,
    OutlierRt,
    LowAccuracy,
    SameChoice,
}

impl ExclusionFlag {
    pub const ALL: [ExclusionFlag; 4] = [
        ExclusionFlag::FastResponder,
        ExclusionFlag::OutlierRt,
        ExclusionFlag::LowAccuracy,
        ExclusionFlag::SameChoice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExclusionFlag::FastResponder => "fast_responder",
            ExclusionFlag::OutlierRt => "outlier_rt",
            ExclusionFlag::LowAccuracy => "low_accuracy",
            ExclusionFlag::SameChoice => "same_choice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionRules {
    /// Flag when the median response time is below this.
    pub min_median_rt_ms: f64,
    /// Flag when any response time exceeds this.
    pub max_rt_ms: u64,
    /// AI conditions: flag overall accuracy below this.
    pub min_accuracy: f64,
    /// AI conditions: flag when one exercise takes more than this share of answers.
    pub max_same_choice_share: f64,
}

impl Default for ExclusionRules {
    fn default() -> Self {
        ExclusionRules {
            min_median_rt_ms: 4_000.0,
            max_rt_ms: 150_000,
            min_accuracy: 0.20,
            max_same_choice_share: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub condition: Condition,
    pub pre_mean: f64,
    pub intervention_mean: f64,
    pub post_mean: f64,
    /// Accuracy over all trials.
    pub overall_mean: f64,
    /// Share of wrong AI suggestions that the final answer adopted; `None`
    /// without AI or without wrong suggestions.
    pub overreliance: Option<f64>,
    pub ai_wrong_trials: usize,
    /// Over every submitted response, initial answers included.
    pub median_rt_ms: f64,
    pub mean_rt_ms: f64,
    pub max_rt_ms: u64,
    /// Largest share of final answers taken by one exercise.
    pub same_choice_share: f64,
    pub exclusion_flags: BTreeSet<ExclusionFlag>,
    pub constructs: BTreeMap<String, f64>,
}

impl ParticipantRecord {
    pub fn included(&self) -> bool {
        self.exclusion_flags.is_empty()
    }
}

fn block_mean(session_id: &str, rows: &[&TrialRow], block: Block) -> Result<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.block == block)
        .map(|r| f64::from(u8::from(r.correct)))
        .collect();
    if v.len() != block.size() {
        return Err(AnalyticsError::Incomplete {
            session_id: session_id.to_string(),
            reason: format!("{} of {} {block} trials answered", v.len(), block.size()),
        });
    }
    Ok(mean(&v).expect("non-empty block"))
}

/// Metrics from the trial rows of one complete session.
pub fn metrics(rows: &[TrialRow]) -> Result<ParticipantRecord> {
    let first = rows
        .first()
        .ok_or_else(|| AnalyticsError::validation("rows", "no trial rows"))?;
    let session_id = first.session_id.as_str();
    if let Some(other) = rows.iter().find(|r| r.session_id != session_id) {
        return Err(AnalyticsError::validation(
            "rows",
            format!("rows of {} mixed into {session_id}", other.session_id),
        ));
    }
    let mut by_trial: BTreeMap<usize, &TrialRow> = BTreeMap::new();
    for r in rows {
        if by_trial.insert(r.trial, r).is_some() {
            return Err(AnalyticsError::validation("rows", format!("{session_id}: trial {} appears twice", r.trial)));
        }
    }
    let rows: Vec<&TrialRow> = by_trial.into_values().collect();
    let pre_mean = block_mean(session_id, &rows, Block::Pre)?;
    let intervention_mean = block_mean(session_id, &rows, Block::Intervention)?;
    let post_mean = block_mean(session_id, &rows, Block::Post)?;
    let condition = first.condition;

    let wrong: Vec<&&TrialRow> = rows
        .iter()
        .filter(|r| r.block == Block::Intervention && r.ai_correct == Some(false))
        .collect();
    let overreliance = (condition.has_ai() && !wrong.is_empty()).then(|| {
        let adopted = wrong.iter().filter(|r| r.fact.as_deref() == Some(r.answer.as_str())).count();
        adopted as f64 / wrong.len() as f64
    });

    let rts: Vec<u64> = rows
        .iter()
        .flat_map(|r| r.initial_rt_ms.into_iter().chain([r.rt_ms]))
        .collect();
    let rts_f: Vec<f64> = rts.iter().map(|&v| v as f64).collect();
    let mut choice_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &rows {
        *choice_counts.entry(&r.answer).or_default() += 1;
    }
    let same = choice_counts.values().copied().max().unwrap_or(0);
    let correct = rows.iter().filter(|r| r.correct).count();

    Ok(ParticipantRecord {
        session_id: session_id.to_string(),
        participant_id: first.participant_id.clone(),
        condition,
        pre_mean,
        intervention_mean,
        post_mean,
        overall_mean: correct as f64 / rows.len() as f64,
        overreliance,
        ai_wrong_trials: wrong.len(),
        median_rt_ms: median(&rts_f).unwrap_or(0.0),
        mean_rt_ms: mean(&rts_f).unwrap_or(0.0),
        max_rt_ms: rts.iter().copied().max().unwrap_or(0),
        same_choice_share: same as f64 / rows.len() as f64,
        exclusion_flags: BTreeSet::new(),
        constructs: BTreeMap::new(),
    })
}

/// Flags for one record under `rules`.
pub fn exclusion_flags(record: &ParticipantRecord, rules: &ExclusionRules) -> BTreeSet<ExclusionFlag> {
    let mut flags = BTreeSet::new();
    if record.median_rt_ms < rules.min_median_rt_ms {
        flags.insert(ExclusionFlag::FastResponder);
    }
    if record.max_rt_ms > rules.max_rt_ms {
        flags.insert(ExclusionFlag::OutlierRt);
    }
    if record.condition.has_ai() {
        if record.overall_mean < rules.min_accuracy {
            flags.insert(ExclusionFlag::LowAccuracy);
        }
        if record.same_choice_share > rules.max_same_choice_share {
            flags.insert(ExclusionFlag::SameChoice);
        }
    }
    flags
}

pub fn apply_exclusions(records: &mut [ParticipantRecord], rules: &ExclusionRules) {
    for r in records {
        r.exclusion_flags = exclusion_flags(r, rules);
    }
}

/// Mean per construct after reverse coding (v -> scale_max + 1 - v).
/// Every Likert item the condition was asked must be present.
pub fn construct_scores(
    values: &BTreeMap<String, u8>,
    instrument: &cef_study::instruments::InstrumentDef,
    condition: Condition,
    scale_max: u8,
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for item in instrument.items_for(condition) {
        let Some(construct) = &item.construct else { continue };
        if item.kind != cef_study::instruments::ItemKind::Likert {
            continue;
        }
        let v = *values
            .get(&item.id)
            .ok_or_else(|| AnalyticsError::validation(format!("items.{}", item.id), "missing response"))?;
        if v < 1 || v > scale_max {
            return Err(AnalyticsError::validation(format!("items.{}", item.id), format!("{v} outside 1..={scale_max}")));
        }
        let v = if item.reverse { scale_max + 1 - v } else { v };
        let e = sums.entry(construct.clone()).or_default();
        e.0 += f64::from(v);
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

/// Construct scores for every session found in questionnaire export rows.
pub fn session_constructs(
    rows: &[QuestionnaireRow],
    instruments: &Instruments,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut grouped: BTreeMap<(&str, cef_study::instruments::Instrument), (Condition, BTreeMap<String, u8>)> = BTreeMap::new();
    for r in rows {
        let def = instruments.get(r.instrument);
        let Some(item) = def.item(&r.item) else {
            return Err(AnalyticsError::validation("item", format!("unknown item `{}`", r.item)));
        };
        if item.kind != cef_study::instruments::ItemKind::Likert {
            continue;
        }
        let v: u8 = r
            .value
            .parse()
            .map_err(|_| AnalyticsError::validation(format!("items.{}", r.item), format!("`{}` is not a Likert value", r.value)))?;
        grouped
            .entry((&r.session_id, r.instrument))
            .or_insert_with(|| (r.condition, BTreeMap::new()))
            .1
            .insert(r.item.clone(), v);
    }
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((session, instrument), (condition, values)) in grouped {
        let scores = construct_scores(&values, instruments.get(instrument), condition, instruments.scale_max)?;
        out.entry(session.to_string()).or_default().extend(scores);
    }
    Ok(out)
}
