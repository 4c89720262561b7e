//! Representation space shared by every other module.
//!
//! Characters and exercises both live in a six-dimensional space
//! (intensity, three goal flags, two preferences). [`joint_rep`] maps a
//! (character, exercise) pair onto the seven-component vector scored by a
//! linear [`ScoringModel`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of components of the joint representation.
pub const JOINT_DIM: usize = 7;

/// Coarse concept a joint component belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConceptClass {
    Intensity,
    Goal,
    Preference,
}

impl ConceptClass {
    pub const ALL: [ConceptClass; 3] = [
        ConceptClass::Intensity,
        ConceptClass::Goal,
        ConceptClass::Preference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConceptClass::Intensity => "Intensity",
            ConceptClass::Goal => "Goal",
            ConceptClass::Preference => "Preference",
        }
    }

    /// Case-insensitive match on the class name, ignoring surrounding whitespace.
    pub fn parse_loose(s: &str) -> Option<Self> {
        let s = s.trim();
        ConceptClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for ConceptClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One component of the joint representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptDim {
    IntensityExceed,
    IntensityUnderuse,
    GoalCardio,
    GoalMuscle,
    GoalFlexibility,
    PrefEnvironment,
    PrefSocial,
}

impl ConceptDim {
    pub const ALL: [ConceptDim; JOINT_DIM] = [
        ConceptDim::IntensityExceed,
        ConceptDim::IntensityUnderuse,
        ConceptDim::GoalCardio,
        ConceptDim::GoalMuscle,
        ConceptDim::GoalFlexibility,
        ConceptDim::PrefEnvironment,
        ConceptDim::PrefSocial,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn class(self) -> ConceptClass {
        match self {
            ConceptDim::IntensityExceed | ConceptDim::IntensityUnderuse => ConceptClass::Intensity,
            ConceptDim::GoalCardio | ConceptDim::GoalMuscle | ConceptDim::GoalFlexibility => {
                ConceptClass::Goal
            }
            ConceptDim::PrefEnvironment | ConceptDim::PrefSocial => ConceptClass::Preference,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConceptDim::IntensityExceed => "intensity_exceed",
            ConceptDim::IntensityUnderuse => "intensity_underuse",
            ConceptDim::GoalCardio => "goal_cardio",
            ConceptDim::GoalMuscle => "goal_muscle",
            ConceptDim::GoalFlexibility => "goal_flexibility",
            ConceptDim::PrefEnvironment => "pref_environment",
            ConceptDim::PrefSocial => "pref_social",
        }
    }

    /// Short human label, e.g. `cardio` or `social setting`.
    pub fn label(self) -> &'static str {
        match self {
            ConceptDim::IntensityExceed => "not exceeding fitness capacity",
            ConceptDim::IntensityUnderuse => "using available fitness capacity",
            ConceptDim::GoalCardio => "cardio",
            ConceptDim::GoalMuscle => "muscle building",
            ConceptDim::GoalFlexibility => "flexibility",
            ConceptDim::PrefEnvironment => "environment",
            ConceptDim::PrefSocial => "social setting",
        }
    }
}

impl fmt::Display for ConceptDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConceptDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConceptDim::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| Error::validation("dimension", format!("unknown dimension `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Indoor,
    Outdoor,
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "indoor" => Ok(Environment::Indoor),
            "outdoor" => Ok(Environment::Outdoor),
            other => Err(Error::validation(
                "environment",
                format!("expected indoor|outdoor, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Environment::Indoor => "indoor",
            Environment::Outdoor => "outdoor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Social {
    Individual,
    Group,
}

impl FromStr for Social {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "individual" => Ok(Social::Individual),
            "group" => Ok(Social::Group),
            other => Err(Error::validation(
                "social",
                format!("expected individual|group, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Social {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Social::Individual => "individual",
            Social::Group => "group",
        })
    }
}

/// Goal flags shared by characters and exercises.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoalFlags {
    pub cardio: bool,
    pub muscle: bool,
    pub flexibility: bool,
}

impl GoalFlags {
    pub fn any(&self) -> bool {
        self.cardio || self.muscle || self.flexibility
    }

    fn as_array(&self) -> [bool; 3] {
        [self.cardio, self.muscle, self.flexibility]
    }
}

/// A character in representation space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterRep {
    /// Sustainable intensity in absolute METs.
    pub met_capacity: f64,
    pub goals: GoalFlags,
    pub environment: Environment,
    pub social: Social,
}

impl CharacterRep {
    pub fn new(
        met_capacity: f64,
        goals: GoalFlags,
        environment: Environment,
        social: Social,
    ) -> Result<Self> {
        let rep = CharacterRep {
            met_capacity,
            goals,
            environment,
            social,
        };
        rep.validate()?;
        Ok(rep)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.met_capacity.is_finite() || self.met_capacity < 1.0 {
            return Err(Error::validation(
                "met_capacity",
                format!(
                    "{} is below resting metabolic rate (1.0)",
                    self.met_capacity
                ),
            ));
        }
        if !self.goals.any() {
            return Err(Error::validation(
                "goals",
                "at least one goal flag must be set",
            ));
        }
        Ok(())
    }
}

/// An exercise in representation space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExerciseRep {
    pub met: f64,
    pub goals: GoalFlags,
    pub environment: Environment,
    pub social: Social,
}

impl ExerciseRep {
    pub fn new(
        met: f64,
        goals: GoalFlags,
        environment: Environment,
        social: Social,
    ) -> Result<Self> {
        let rep = ExerciseRep {
            met,
            goals,
            environment,
            social,
        };
        rep.validate()?;
        Ok(rep)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.met.is_finite() || self.met <= 0.0 {
            return Err(Error::validation(
                "met",
                format!("{} must be positive", self.met),
            ));
        }
        Ok(())
    }
}

/// Joint character-exercise vector indexed by [`ConceptDim`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRep(pub [f64; JOINT_DIM]);

impl JointRep {
    pub fn values(&self) -> &[f64; JOINT_DIM] {
        &self.0
    }
}

impl Index<ConceptDim> for JointRep {
    type Output = f64;

    fn index(&self, dim: ConceptDim) -> &f64 {
        &self.0[dim.index()]
    }
}

fn indicator(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// Joint representation of a character and an exercise.
///
/// Intensity components penalise exercises above or below the character's
/// capacity, goal components reward matching a stated goal (and penalise
/// missing it), preference components reward an exact match.
pub fn joint_rep(x: &CharacterRep, y: &ExerciseRep) -> JointRep {
    let mut g = [0.0; JOINT_DIM];
    g[0] = (x.met_capacity - y.met).min(0.0);
    g[1] = (y.met - x.met_capacity).min(0.0);
    for (slot, (xc, yc)) in x
        .goals
        .as_array()
        .into_iter()
        .zip(y.goals.as_array())
        .enumerate()
    {
        let (xv, yv) = (indicator(xc), indicator(yc));
        g[2 + slot] = indicator(xv > 0.0) * ((yv - xv) + indicator(yc == xc));
    }
    g[5] = indicator(x.environment == y.environment);
    g[6] = indicator(x.social == y.social);
    JointRep(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Expert,
    Human,
    Synthetic,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Expert => "expert",
            Provenance::Human => "human",
            Provenance::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expert" => Ok(Provenance::Expert),
            "human" => Ok(Provenance::Human),
            "synthetic" => Ok(Provenance::Synthetic),
            other => Err(Error::validation(
                "provenance",
                format!("unknown `{other}`"),
            )),
        }
    }
}

/// Linear scoring model over the joint representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringModel {
    pub weights: [f64; JOINT_DIM],
    /// Classifier intercept. Kept for reference; it does not enter [`score`].
    pub bias: f64,
    pub provenance: Provenance,
}

impl ScoringModel {
    pub fn new(weights: [f64; JOINT_DIM], provenance: Provenance) -> Self {
        ScoringModel {
            weights,
            bias: 0.0,
            provenance,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        out
    }
}

pub fn dot(w: &[f64; JOINT_DIM], g: &[f64; JOINT_DIM]) -> f64 {
    w.iter().zip(g).map(|(a, b)| a * b).sum()
}

/// `wᵀ g(x, y)`, bias excluded.
pub fn score(x: &CharacterRep, y: &ExerciseRep, model: &ScoringModel) -> f64 {
    dot(&model.weights, &joint_rep(x, y).0)
}

/// Descending by score, ties broken by ascending id.
pub fn rank_exercises<S: AsRef<str>>(
    x: &CharacterRep,
    catalog: &[(S, ExerciseRep)],
    model: &ScoringModel,
) -> Result<Vec<(String, f64)>> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let mut ranked: Vec<(String, f64)> = catalog
        .iter()
        .map(|(id, rep)| (id.as_ref().to_string(), score(x, rep, model)))
        .collect();
    ranked.sort_by(compare_ranked);
    Ok(ranked)
}

pub(crate) fn compare_ranked(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}
