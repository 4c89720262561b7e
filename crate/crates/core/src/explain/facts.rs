use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::data;
use crate::domain::ConceptDim;
use crate::error::{Error, Result};
use crate::persona::HighLevelGoal;
use crate::template::{self, BRACES};

use super::Subject;

/// Curated clauses: what each exercise is like on each dimension, and why a
/// dimension matters to a character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainFactTable {
    exercise: BTreeMap<(String, ConceptDim), String>,
    benefit: BTreeMap<(String, ConceptDim), String>,
}

#[derive(Debug, Deserialize)]
struct ExerciseFactRow {
    exercise_id: String,
    dimension: String,
    clause: String,
}

#[derive(Debug, Deserialize)]
struct BenefitRow {
    key: String,
    dimension: String,
    clause: String,
}

/// Wildcard benefit key.
const ANY: &str = "*";

fn parse_dim(row: usize, s: &str) -> Result<ConceptDim> {
    s.parse().map_err(|_| Error::Parse {
        row,
        reason: format!("unknown dimension `{s}`"),
    })
}

impl DomainFactTable {
    pub fn bundled() -> Self {
        Self::from_csv(data::EXERCISE_FACTS_CSV, data::BENEFIT_FACTS_CSV)
            .expect("bundled fact tables are valid")
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        Self::from_csv(&read("exercise_facts.csv")?, &read("benefit_facts.csv")?)
    }

    pub fn from_csv(exercise_facts: &str, benefit_facts: &str) -> Result<Self> {
        let mut exercise = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(exercise_facts.as_bytes());
        for (i, row) in rdr.deserialize::<ExerciseFactRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse {
                row: line,
                reason: e.to_string(),
            })?;
            let dim = parse_dim(line, &row.dimension)?;
            if exercise
                .insert((row.exercise_id.clone(), dim), row.clause)
                .is_some()
            {
                return Err(Error::Parse {
                    row: line,
                    reason: format!("duplicate entry for ({}, {dim})", row.exercise_id),
                });
            }
        }
        let mut benefit = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(benefit_facts.as_bytes());
        for (i, row) in rdr.deserialize::<BenefitRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse {
                row: line,
                reason: e.to_string(),
            })?;
            let dim = parse_dim(line, &row.dimension)?;
            benefit.insert((row.key, dim), row.clause);
        }
        Ok(DomainFactTable { exercise, benefit })
    }

    /// Error naming the first (exercise, dimension) without a clause.
    pub fn check_total<S: AsRef<str>>(&self, exercise_ids: &[S]) -> Result<()> {
        for id in exercise_ids {
            for dim in ConceptDim::ALL {
                self.exercise_clause(id.as_ref(), dim)?;
            }
        }
        Ok(())
    }

    pub fn exercise_clause(&self, exercise_id: &str, dim: ConceptDim) -> Result<&str> {
        self.exercise
            .get(&(exercise_id.to_string(), dim))
            .map(String::as_str)
            .ok_or_else(|| Error::MissingFact {
                exercise: exercise_id.to_string(),
                dimension: dim.name().to_string(),
            })
    }

    fn benefit_for(&self, key: &str, dim: ConceptDim) -> Option<&str> {
        self.benefit
            .get(&(key.to_string(), dim))
            .map(String::as_str)
    }

    /// Benefit clause for `dim`, personalised to the subject.
    pub fn benefit_clause(&self, subject: &Subject, dim: ConceptDim) -> Result<String> {
        let keys: Vec<String> = match dim {
            ConceptDim::PrefEnvironment => vec![subject.rep.environment.to_string()],
            ConceptDim::PrefSocial => vec![subject.rep.social.to_string()],
            ConceptDim::GoalCardio | ConceptDim::GoalMuscle | ConceptDim::GoalFlexibility => {
                subject
                    .high_level_goals
                    .iter()
                    .map(|g: &HighLevelGoal| g.key().to_string())
                    .collect()
            }
            ConceptDim::IntensityExceed | ConceptDim::IntensityUnderuse => Vec::new(),
        };
        let mut clauses: Vec<&str> = Vec::new();
        for key in &keys {
            if let Some(c) = self.benefit_for(key, dim) {
                if !clauses.contains(&c) {
                    clauses.push(c);
                }
            }
        }
        if clauses.is_empty() {
            clauses.extend(self.benefit_for(ANY, dim));
        }
        if clauses.is_empty() {
            return Err(Error::MissingFact {
                exercise: keys.first().cloned().unwrap_or_else(|| ANY.to_string()),
                dimension: dim.name().to_string(),
            });
        }
        let joined = clauses.join(", and ");
        let mut values = BTreeMap::new();
        values.insert("name", subject.name.clone());
        template::fill(&joined, BRACES, &values)
    }
}
