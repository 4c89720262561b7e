//! The full analysis of one study directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cef_study::export::{questionnaire_rows, read_csv, session_rows, trial_rows, QuestionnaireRow, SessionRow, TrialRow, QUESTIONNAIRES_FILE, SESSIONS_FILE, TRIALS_FILE};
use cef_study::instruments::Instruments;
use cef_study::session::{replay, SessionStatus};
use cef_study::store::{read_events, EVENTS_FILE};
use cef_study::{Block, Condition};
use serde::{Deserialize, Serialize};

use crate::ancova::{ancova, anova, AncovaResult, Observation};
use crate::error::{AnalyticsError, Result};
use crate::metrics::{apply_exclusions, metrics, session_constructs, ExclusionFlag, ExclusionRules, ParticipantRecord};
use crate::stats::{chi_square_contingency, mean, median, normalized_entropy, rank_trend, sample_sd, ChiSquare, Correlation, DEFAULT_RESAMPLES, DEFAULT_SEED};

pub const PARTICIPANTS_FILE: &str = "participants.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Exported rows of one study.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyData {
    pub sessions: Vec<SessionRow>,
    pub trials: Vec<TrialRow>,
    pub questionnaires: Vec<QuestionnaireRow>,
}

/// Read the CSV exports in `dir`, or rebuild them from `events.ndjson` when
/// no exports are present.
pub fn load_study(dir: impl AsRef<Path>, instruments: &Instruments) -> Result<StudyData> {
    let dir = dir.as_ref();
    let data = if dir.join(TRIALS_FILE).exists() {
        let optional = |name: &str| dir.join(name).exists().then(|| dir.join(name));
        StudyData {
            trials: read_csv(&dir.join(TRIALS_FILE))?,
            sessions: optional(SESSIONS_FILE).map(|p| read_csv(&p)).transpose()?.unwrap_or_default(),
            questionnaires: optional(QUESTIONNAIRES_FILE).map(|p| read_csv(&p)).transpose()?.unwrap_or_default(),
        }
    } else if dir.join(EVENTS_FILE).exists() {
        let mut logs: BTreeMap<String, Vec<_>> = BTreeMap::new();
        let mut order = Vec::new();
        for e in read_events(dir.join(EVENTS_FILE))? {
            if !logs.contains_key(&e.session_id) {
                order.push(e.session_id.clone());
            }
            logs.entry(e.session_id.clone()).or_default().push(e);
        }
        let sessions = order.iter().map(|id| replay(&logs[id])).collect::<std::result::Result<Vec<_>, _>>()?;
        StudyData {
            sessions: session_rows(&sessions),
            trials: trial_rows(&sessions),
            questionnaires: questionnaire_rows(&sessions, instruments),
        }
    } else {
        StudyData::default()
    };
    if data.sessions.is_empty() && data.trials.is_empty() {
        return Err(AnalyticsError::NoSessions(dir.to_path_buf()));
    }
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// High when strictly above the median of included participants.
    Median,
    /// Bottom and top thirds; the middle third is dropped.
    Tertile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub rules: ExclusionRules,
    /// When false, flags are still reported but nobody is dropped.
    pub apply_exclusions: bool,
    pub resamples: usize,
    pub seed: u64,
    pub split: SplitRule,
    /// Number of exercises participants chose from.
    pub categories: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            rules: ExclusionRules::default(),
            apply_exclusions: true,
            resamples: DEFAULT_RESAMPLES,
            seed: DEFAULT_SEED,
            split: SplitRule::Median,
            categories: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub se: Option<f64>,
}

impl Descriptive {
    fn of(v: &[f64]) -> Option<Self> {
        let m = mean(v)?;
        let sd = sample_sd(v);
        Some(Descriptive {
            n: v.len(),
            mean: m,
            sd,
            se: sd.map(|s| s / (v.len() as f64).sqrt()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n: usize,
    pub pre: Option<Descriptive>,
    pub accuracy: Option<Descriptive>,
    pub learning: Option<Descriptive>,
    pub overreliance: Option<Descriptive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub mean: f64,
    pub sd: Option<f64>,
    pub per_character: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoilPickCounts {
    pub fact: usize,
    pub foil: usize,
    pub other: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoilPick {
    pub condition: Condition,
    pub counts: FoilPickCounts,
    /// Against the unilateral condition's counts.
    pub test: Option<ChiSquare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAnalysis {
    pub condition: Condition,
    pub threshold: f64,
    pub n_high: usize,
    pub n_low: usize,
    pub learning: Option<AncovaResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_sessions: usize,
    pub n_complete: usize,
    pub n_analyzed: usize,
    pub exclusions: BTreeMap<ExclusionFlag, usize>,
    pub conditions: Vec<ConditionSummary>,
    pub accuracy: Option<AncovaResult>,
    pub learning: Option<AncovaResult>,
    pub overreliance: Option<AncovaResult>,
    pub subjective: BTreeMap<String, AncovaResult>,
    pub choice_entropy: Option<EntropySummary>,
    pub foil_pick: Vec<FoilPick>,
    pub rank_trend: BTreeMap<Condition, Correlation>,
    pub individual_differences: BTreeMap<String, Vec<SplitAnalysis>>,
    /// Analyses that could not be run, with the reason.
    pub skipped: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub participants: Vec<ParticipantRecord>,
    pub summary: Summary,
}

use Condition::{ContrastiveAfter as CA, ContrastivePredicted as CP, ContrastiveRandom as CR, NoAi, Unilateral as UN};

pub const LEARNING_CONTRASTS: [(Condition, Condition); 6] = [(CP, NoAi), (CA, NoAi), (CP, UN), (CA, UN), (CP, CR), (CP, CA)];
pub const ACCURACY_CONTRASTS: [(Condition, Condition); 3] = [(CP, UN), (CA, UN), (CP, CA)];
pub const OVERRELIANCE_CONTRASTS: [(Condition, Condition); 3] = [(CP, UN), (CR, UN), (CP, CA)];
pub const SUBJECTIVE_CONTRASTS: [(Condition, Condition); 3] = [(CP, UN), (CP, CA), (CA, UN)];

fn present(contrasts: &[(Condition, Condition)], obs: &[Observation]) -> Vec<(String, String)> {
    let has = |c: Condition| obs.iter().any(|o| o.group == c.name());
    contrasts
        .iter()
        .filter(|(a, b)| has(*a) && has(*b))
        .map(|(a, b)| (a.name().to_string(), b.name().to_string()))
        .collect()
}

fn try_fit(
    skipped: &mut BTreeMap<String, String>,
    name: &str,
    obs: Vec<Observation>,
    contrasts: &[(Condition, Condition)],
    covariate: bool,
) -> Option<AncovaResult> {
    let pairs = present(contrasts, &obs);
    let result = if covariate { ancova(&obs, &pairs) } else { anova(&obs, &pairs) };
    result.map_err(|e| skipped.insert(name.to_string(), e.to_string())).ok()
}

/// Trial rows of every complete session, grouped by session in row order.
fn complete_sessions(data: &StudyData) -> Vec<(&str, Vec<TrialRow>)> {
    let complete: Option<std::collections::BTreeSet<&str>> = (!data.sessions.is_empty()).then(|| {
        data.sessions
            .iter()
            .filter(|s| s.status == SessionStatus::Completed)
            .map(|s| s.session_id.as_str())
            .collect()
    });
    let mut order: Vec<&str> = Vec::new();
    let mut rows: BTreeMap<&str, Vec<TrialRow>> = BTreeMap::new();
    for r in &data.trials {
        if complete.as_ref().is_some_and(|c| !c.contains(r.session_id.as_str())) {
            continue;
        }
        if !rows.contains_key(r.session_id.as_str()) {
            order.push(&r.session_id);
        }
        rows.entry(&r.session_id).or_default().push(r.clone());
    }
    order.into_iter().map(|id| (id, rows.remove(id).unwrap_or_default())).collect()
}

/// Unassisted choices: pre and post blocks, the no-AI intervention block and
/// initial answers given before support appeared.
fn unassisted(r: &TrialRow) -> Option<(&str, usize)> {
    if r.block != Block::Intervention || r.condition == Condition::NoAi {
        Some((&r.answer, r.expert_rank))
    } else {
        r.initial_answer.as_deref().zip(r.initial_expert_rank)
    }
}

pub fn analyze(data: &StudyData, instruments: &Instruments, opts: &AnalysisOptions) -> Result<Report> {
    let mut skipped = BTreeMap::new();
    let mut participants = Vec::new();
    for (id, rows) in complete_sessions(data) {
        match metrics(&rows) {
            Ok(r) => participants.push(r),
            Err(e) => {
                skipped.insert(format!("session {id}"), e.to_string());
            }
        }
    }
    apply_exclusions(&mut participants, &opts.rules);
    let constructs = session_constructs(&data.questionnaires, instruments)?;
    for p in &mut participants {
        if let Some(c) = constructs.get(&p.session_id) {
            p.constructs = c.clone();
        }
    }
    let n_sessions = if data.sessions.is_empty() {
        complete_sessions(data).len()
    } else {
        data.sessions.len()
    };

    let mut exclusions: BTreeMap<ExclusionFlag, usize> = ExclusionFlag::ALL.into_iter().map(|f| (f, 0)).collect();
    for p in &participants {
        for f in &p.exclusion_flags {
            *exclusions.get_mut(f).expect("all flags") += 1;
        }
    }
    let analyzed: Vec<&ParticipantRecord> = participants.iter().filter(|p| !opts.apply_exclusions || p.included()).collect();
    let analyzed_ids: std::collections::BTreeSet<&str> = analyzed.iter().map(|p| p.session_id.as_str()).collect();

    let conditions = Condition::ALL
        .into_iter()
        .filter_map(|c| {
            let group: Vec<&&ParticipantRecord> = analyzed.iter().filter(|p| p.condition == c).collect();
            if group.is_empty() {
                return None;
            }
            let col = |f: &dyn Fn(&ParticipantRecord) -> Option<f64>| Descriptive::of(&group.iter().filter_map(|p| f(p)).collect::<Vec<_>>());
            Some(ConditionSummary {
                condition: c,
                n: group.len(),
                pre: col(&|p| Some(p.pre_mean)),
                accuracy: col(&|p| Some(p.intervention_mean)),
                learning: col(&|p| Some(p.post_mean)),
                overreliance: col(&|p| p.overreliance),
            })
        })
        .collect();

    let obs = |f: &dyn Fn(&ParticipantRecord) -> Option<f64>, filter: &dyn Fn(&ParticipantRecord) -> bool| -> Vec<Observation> {
        analyzed
            .iter()
            .filter(|p| filter(p))
            .filter_map(|p| f(p).map(|y| Observation::new(p.condition.name(), y, p.pre_mean)))
            .collect()
    };
    let all = |_: &ParticipantRecord| true;
    let accuracy = try_fit(&mut skipped, "accuracy", obs(&|p| Some(p.intervention_mean), &all), &ACCURACY_CONTRASTS, true);
    let learning = try_fit(&mut skipped, "learning", obs(&|p| Some(p.post_mean), &all), &LEARNING_CONTRASTS, true);
    let overreliance = try_fit(&mut skipped, "overreliance", obs(&|p| p.overreliance, &all), &OVERRELIANCE_CONTRASTS, true);

    let mut subjective = BTreeMap::new();
    let construct_names: std::collections::BTreeSet<String> = analyzed.iter().flat_map(|p| p.constructs.keys().cloned()).collect();
    for name in construct_names.iter().filter(|n| !matches!(n.as_str(), "nfc" | "aot")) {
        let o = obs(&|p| p.constructs.get(name).copied(), &all);
        if let Some(fit) = try_fit(&mut skipped, &format!("subjective.{name}"), o, &SUBJECTIVE_CONTRASTS, false) {
            subjective.insert(name.clone(), fit);
        }
    }

    // choice entropy per character over unassisted answers
    let mut choices: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in data.trials.iter().filter(|r| analyzed_ids.contains(r.session_id.as_str())) {
        if let Some((answer, _)) = unassisted(r) {
            *choices.entry(&r.character_id).or_default().entry(answer).or_default() += 1.0;
        }
    }
    let choice_entropy = if choices.is_empty() {
        skipped.insert("choice_entropy".into(), "no unassisted answers".into());
        None
    } else {
        let per_character = choices
            .iter()
            .map(|(c, counts)| {
                let v: Vec<f64> = counts.values().copied().collect();
                Ok((c.to_string(), normalized_entropy(&v, opts.categories.max(v.len()))?))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        let values: Vec<f64> = per_character.values().copied().collect();
        Some(EntropySummary {
            mean: mean(&values).expect("non-empty"),
            sd: sample_sd(&values),
            per_character,
        })
    };

    // did the answer land on the fact, the foil or elsewhere?
    let pick_counts = |c: Condition| {
        let mut k = FoilPickCounts { fact: 0, foil: 0, other: 0 };
        for r in data.trials.iter().filter(|r| r.condition == c && r.block == Block::Intervention && analyzed_ids.contains(r.session_id.as_str())) {
            let (Some(fact), Some(foil)) = (&r.fact, &r.reference_foil) else { continue };
            if r.answer == *fact {
                k.fact += 1;
            } else if r.answer == *foil {
                k.foil += 1;
            } else {
                k.other += 1;
            }
        }
        k
    };
    let baseline = pick_counts(UN);
    let mut foil_pick = Vec::new();
    for c in [UN, CP, CR] {
        let counts = pick_counts(c);
        if counts.fact + counts.foil + counts.other == 0 {
            continue;
        }
        let test = if c == UN {
            None
        } else {
            let row = |k: &FoilPickCounts| vec![k.fact as f64, k.foil as f64, k.other as f64];
            chi_square_contingency(&[row(&counts), row(&baseline)])
                .map_err(|e| skipped.insert(format!("foil_pick.{c}"), e.to_string()))
                .ok()
        };
        foil_pick.push(FoilPick { condition: c, counts, test });
    }

    let mut trend = BTreeMap::new();
    for c in Condition::ALL {
        let points: Vec<(usize, usize)> = data
            .trials
            .iter()
            .filter(|r| r.condition == c && analyzed_ids.contains(r.session_id.as_str()))
            .filter_map(|r| unassisted(r).map(|(_, rank)| (r.trial + 1, rank)))
            .collect();
        if points.is_empty() {
            continue;
        }
        match rank_trend(&points, opts.resamples, opts.seed) {
            Ok(r) => {
                trend.insert(c, r);
            }
            Err(e) => {
                skipped.insert(format!("rank_trend.{c}"), e.to_string());
            }
        }
    }

    let mut individual_differences = BTreeMap::new();
    for scale in ["nfc", "aot"] {
        let scored: Vec<(&ParticipantRecord, f64)> = analyzed
            .iter()
            .filter_map(|p| p.constructs.get(scale).map(|s| (*p, *s)))
            .collect();
        if scored.is_empty() {
            continue;
        }
        let values: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
        let (low_cut, high_cut) = match opts.split {
            SplitRule::Median => {
                let m = median(&values).expect("non-empty");
                (m, m)
            }
            SplitRule::Tertile => {
                let mut s = values.clone();
                s.sort_by(f64::total_cmp);
                (
                    cef_core::bootstrap::quantile_sorted(&s, 1.0 / 3.0),
                    cef_core::bootstrap::quantile_sorted(&s, 2.0 / 3.0),
                )
            }
        };
        let mut per_condition = Vec::new();
        for c in Condition::ALL {
            let obs: Vec<Observation> = scored
                .iter()
                .filter(|(p, _)| p.condition == c)
                .filter_map(|(p, s)| {
                    let group = if *s > high_cut {
                        "high"
                    } else if *s <= low_cut {
                        "low"
                    } else {
                        return None;
                    };
                    Some(Observation::new(group, p.post_mean, p.pre_mean))
                })
                .collect();
            if obs.is_empty() {
                continue;
            }
            let n_high = obs.iter().filter(|o| o.group == "high").count();
            let pairs = vec![("high".to_string(), "low".to_string())];
            let (learning, why) = match ancova(&obs, &pairs) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            per_condition.push(SplitAnalysis {
                condition: c,
                threshold: high_cut,
                n_high,
                n_low: obs.len() - n_high,
                learning,
                skipped: why,
            });
        }
        individual_differences.insert(scale.to_string(), per_condition);
    }

    let summary = Summary {
        n_sessions,
        n_complete: participants.len(),
        n_analyzed: analyzed.len(),
        exclusions,
        conditions,
        accuracy,
        learning,
        overreliance,
        subjective,
        choice_entropy,
        foil_pick,
        rank_trend: trend,
        individual_differences,
        skipped,
    };
    Ok(Report { participants, summary })
}

/// Flat participants.csv row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub condition: Condition,
    pub pre_mean: f64,
    pub intervention_mean: f64,
    pub post_mean: f64,
    pub overall_mean: f64,
    pub overreliance: Option<f64>,
    pub ai_wrong_trials: usize,
    pub median_rt_ms: f64,
    pub mean_rt_ms: f64,
    pub max_rt_ms: u64,
    pub same_choice_share: f64,
    pub included: bool,
    /// `;`-separated flag names.
    pub exclusion_flags: String,
    pub competence: Option<f64>,
    pub autonomy: Option<f64>,
    pub relatedness: Option<f64>,
    pub interest: Option<f64>,
    pub mental_demand: Option<f64>,
    pub nfc: Option<f64>,
    pub aot: Option<f64>,
}

impl From<&ParticipantRecord> for ParticipantRow {
    fn from(p: &ParticipantRecord) -> Self {
        let c = |k: &str| p.constructs.get(k).copied();
        ParticipantRow {
            session_id: p.session_id.clone(),
            participant_id: p.participant_id.clone(),
            condition: p.condition,
            pre_mean: p.pre_mean,
            intervention_mean: p.intervention_mean,
            post_mean: p.post_mean,
            overall_mean: p.overall_mean,
            overreliance: p.overreliance,
            ai_wrong_trials: p.ai_wrong_trials,
            median_rt_ms: p.median_rt_ms,
            mean_rt_ms: p.mean_rt_ms,
            max_rt_ms: p.max_rt_ms,
            same_choice_share: p.same_choice_share,
            included: p.included(),
            exclusion_flags: p.exclusion_flags.iter().map(|f| f.name()).collect::<Vec<_>>().join(";"),
            competence: c("competence"),
            autonomy: c("autonomy"),
            relatedness: c("relatedness"),
            interest: c("interest"),
            mental_demand: c("mental_demand"),
            nfc: c("nfc"),
            aot: c("aot"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub condition: String,
    pub mean: f64,
    pub se: f64,
}

fn plot_rows(fit: &AncovaResult) -> Vec<PlotRow> {
    fit.groups
        .iter()
        .map(|g| PlotRow {
            condition: g.group.clone(),
            mean: g.marginal_mean,
            se: g.se,
        })
        .collect()
}

/// Write participants.csv, summary.json and `plot_<measure>.csv` files.
pub fn write_report(out: impl AsRef<Path>, report: &Report) -> Result<Vec<PathBuf>> {
    let out = out.as_ref();
    std::fs::create_dir_all(out).map_err(|e| AnalyticsError::io(out, e))?;
    let mut written = Vec::new();

    let path = out.join(PARTICIPANTS_FILE);
    let rows: Vec<ParticipantRow> = report.participants.iter().map(ParticipantRow::from).collect();
    cef_study::export::write_csv(&path, &rows)?;
    written.push(path);

    let path = out.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&report.summary)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| AnalyticsError::io(&path, e))?;
    written.push(path);

    let s = &report.summary;
    for (name, fit) in [("accuracy", &s.accuracy), ("learning", &s.learning), ("overreliance", &s.overreliance)] {
        if let Some(fit) = fit {
            let path = out.join(format!("plot_{name}.csv"));
            cef_study::export::write_csv(&path, &plot_rows(fit))?;
            written.push(path);
        }
    }
    for (name, fit) in &s.subjective {
        let path = out.join(format!("plot_{name}.csv"));
        cef_study::export::write_csv(&path, &plot_rows(fit))?;
        written.push(path);
    }
    Ok(written)
}
