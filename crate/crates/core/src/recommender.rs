//! Fact and foil selection, including the simulated AI's error schedule.
//!
//! The fact is the expert model's top exercise except on scheduled error
//! trials, where the AI instead suggests what the human model would pick.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{self, Interval};
use crate::domain::{rank_exercises, CharacterRep, ExerciseRep, ScoringModel};
use crate::error::{Error, Result};
use crate::seed;

pub const INTERVENTION_SIZE: usize = 14;
pub const ERROR_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoilSource {
    Predicted,
    Random,
    /// Filled from the participant's own first answer.
    Inputted,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub fact_id: String,
    pub foil_id: Option<String>,
    pub ai_is_correct: bool,
    pub ground_truth_id: String,
    pub foil_source: FoilSource,
}

impl Recommendation {
    /// Attach the participant's choice as foil. Choosing the fact leaves no foil.
    pub fn with_inputted_foil(mut self, choice: &str) -> Self {
        self.foil_id = (choice != self.fact_id).then(|| choice.to_string());
        self.foil_source = FoilSource::Inputted;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSchedule {
    pub intervention_size: usize,
    pub error_trials: BTreeSet<usize>,
    pub rng_seed: u64,
}

impl ErrorSchedule {
    /// Four distinct error trials out of fourteen, drawn from the seed.
    pub fn draw(rng_seed: u64) -> Self {
        let mut rng = seed::rng(rng_seed);
        let error_trials = sample(&mut rng, INTERVENTION_SIZE, ERROR_COUNT)
            .into_iter()
            .collect();
        ErrorSchedule {
            intervention_size: INTERVENTION_SIZE,
            error_trials,
            rng_seed,
        }
    }

    /// A fixed schedule shared across sessions.
    pub fn fixed(error_trials: impl IntoIterator<Item = usize>, rng_seed: u64) -> Result<Self> {
        let schedule = ErrorSchedule {
            intervention_size: INTERVENTION_SIZE,
            error_trials: error_trials.into_iter().collect(),
            rng_seed,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.error_trials.len() != ERROR_COUNT {
            return Err(Error::validation(
                "error_trials",
                format!(
                    "expected {ERROR_COUNT} distinct indices, got {}",
                    self.error_trials.len()
                ),
            ));
        }
        if let Some(&bad) = self
            .error_trials
            .iter()
            .find(|&&i| i >= self.intervention_size)
        {
            return Err(Error::TrialOutOfRange {
                index: bad,
                size: self.intervention_size,
            });
        }
        Ok(())
    }

    pub fn is_error(&self, trial_index: usize) -> bool {
        self.error_trials.contains(&trial_index)
    }
}

fn ensure_size(dropdown: &[(String, ExerciseRep)], needed: usize) -> Result<()> {
    if dropdown.len() < needed {
        return Err(Error::DropdownTooSmall {
            needed,
            actual: dropdown.len(),
        });
    }
    Ok(())
}

/// Highest-scoring exercise outside `exclude`, alphabetical on ties.
fn best_excluding(
    x: &CharacterRep,
    dropdown: &[(String, ExerciseRep)],
    model: &ScoringModel,
    exclude: &[&str],
) -> Result<String> {
    let ranked = rank_exercises(x, dropdown, model)?;
    ranked
        .into_iter()
        .map(|(id, _)| id)
        .find(|id| !exclude.contains(&id.as_str()))
        .ok_or(Error::DropdownTooSmall {
            needed: exclude.len() + 1,
            actual: dropdown.len(),
        })
}

pub fn ground_truth(
    x: &CharacterRep,
    dropdown: &[(String, ExerciseRep)],
    expert: &ScoringModel,
) -> Result<String> {
    best_excluding(x, dropdown, expert, &[])
}

pub fn predicted_foil(
    x: &CharacterRep,
    dropdown: &[(String, ExerciseRep)],
    human: &ScoringModel,
    exclude: &str,
) -> Result<String> {
    ensure_size(dropdown, 2)?;
    best_excluding(x, dropdown, human, &[exclude])
}

/// Uniform draw over the dropdown minus `exclude`, from a per-trial stream of `rng_seed`.
pub fn random_foil(
    dropdown: &[(String, ExerciseRep)],
    exclude: &[&str],
    rng_seed: u64,
) -> Result<String> {
    let options: Vec<&str> = dropdown
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !exclude.contains(id))
        .collect();
    if options.is_empty() {
        return Err(Error::DropdownTooSmall {
            needed: exclude.len() + 1,
            actual: dropdown.len(),
        });
    }
    let mut rng = seed::rng(rng_seed);
    Ok(options[rng.random_range(0..options.len())].to_string())
}

#[derive(Debug, Clone, Copy)]
pub struct Models<'a> {
    pub expert: &'a ScoringModel,
    pub human: &'a ScoringModel,
}

pub fn recommend(
    x: &CharacterRep,
    dropdown: &[(String, ExerciseRep)],
    models: Models<'_>,
    trial_index: usize,
    schedule: &ErrorSchedule,
    foil_source: FoilSource,
) -> Result<Recommendation> {
    if trial_index >= schedule.intervention_size {
        return Err(Error::TrialOutOfRange {
            index: trial_index,
            size: schedule.intervention_size,
        });
    }
    let truth = ground_truth(x, dropdown, models.expert)?;
    let is_error = schedule.is_error(trial_index);
    let foil_seed = seed::derive(schedule.rng_seed ^ 0xF011, trial_index as u64);

    let fact = if is_error {
        ensure_size(dropdown, 2)?;
        predicted_foil(x, dropdown, models.human, &truth)?
    } else {
        truth.clone()
    };
    // On error trials neither suggestion may be the correct answer.
    let mut exclude = vec![fact.as_str()];
    if is_error {
        exclude.push(truth.as_str());
    }
    let foil_id = match foil_source {
        FoilSource::Predicted => {
            ensure_size(dropdown, exclude.len() + 1)?;
            Some(best_excluding(x, dropdown, models.human, &exclude)?)
        }
        FoilSource::Random => {
            ensure_size(dropdown, exclude.len() + 1)?;
            Some(random_foil(dropdown, &exclude, foil_seed)?)
        }
        FoilSource::Inputted | FoilSource::None => None,
    };
    Ok(Recommendation {
        ai_is_correct: fact == truth,
        fact_id: fact,
        foil_id,
        ground_truth_id: truth,
        foil_source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoilAgreement {
    pub mean: f64,
    pub ci: Interval,
    pub per_dataset: Vec<f64>,
}

/// Whether the human-centred foil matches the expert model's own runner-up.
pub fn foil_matches_runner_up(
    x: &CharacterRep,
    dropdown: &[(String, ExerciseRep)],
    models: Models<'_>,
) -> Result<bool> {
    ensure_size(dropdown, 2)?;
    let ranked = rank_exercises(x, dropdown, models.expert)?;
    let fact = &ranked[0].0;
    let runner_up = &ranked[1].0;
    Ok(&predicted_foil(x, dropdown, models.human, fact)? == runner_up)
}

/// Per-dataset agreement rate between predicted foils and the expert runner-up,
/// with a percentile bootstrap interval over datasets.
pub fn foil_agreement_analysis(
    datasets: &[Vec<CharacterRep>],
    dropdown: &[(String, ExerciseRep)],
    models: Models<'_>,
    rng_seed: u64,
) -> Result<FoilAgreement> {
    if datasets.is_empty() || datasets.iter().any(Vec::is_empty) {
        return Err(Error::validation(
            "datasets",
            "need at least one non-empty dataset",
        ));
    }
    let per_dataset = datasets
        .iter()
        .map(|chars| {
            let hits = chars
                .iter()
                .map(|x| foil_matches_runner_up(x, dropdown, models))
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&h| h)
                .count();
            Ok(hits as f64 / chars.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = bootstrap::mean(&per_dataset).expect("non-empty");
    let ci = bootstrap::percentile_ci(
        &per_dataset,
        bootstrap::mean,
        bootstrap::DEFAULT_RESAMPLES,
        0.95,
        rng_seed,
    )?;
    Ok(FoilAgreement {
        mean,
        ci,
        per_dataset,
    })
}

/// Rank (1-based) of `id` in the model's ordering.
pub fn rank_of(
    x: &CharacterRep,
    dropdown: &[(String, ExerciseRep)],
    model: &ScoringModel,
    id: &str,
) -> Result<usize> {
    let ranked = rank_exercises(x, dropdown, model)?;
    ranked
        .iter()
        .position(|(e, _)| e == id)
        .map(|p| p + 1)
        .ok_or_else(|| Error::UnknownExercise(id.to_string()))
}

/// Softmax weights of the model's scores at temperature `t`, in dropdown order.
pub fn softmax_scores(
    x: &CharacterRep,
    dropdown: &[(String, ExerciseRep)],
    model: &ScoringModel,
    t: f64,
) -> Vec<f64> {
    let scores: Vec<f64> = dropdown
        .iter()
        .map(|(_, y)| crate::domain::score(x, y, model) / t)
        .collect();
    let max = scores
        .iter()
        .copied()
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        .unwrap_or(0.0);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}
