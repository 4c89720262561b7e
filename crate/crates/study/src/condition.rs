use std::fmt;
use std::str::FromStr;

use cef_core::recommender::FoilSource;
use serde::{Deserialize, Serialize};

use crate::error::StudyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    NoAi,
    Unilateral,
    ContrastivePredicted,
    ContrastiveRandom,
    ContrastiveAfter,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::NoAi,
        Condition::Unilateral,
        Condition::ContrastivePredicted,
        Condition::ContrastiveRandom,
        Condition::ContrastiveAfter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::NoAi => "no_ai",
            Condition::Unilateral => "unilateral",
            Condition::ContrastivePredicted => "contrastive_predicted",
            Condition::ContrastiveRandom => "contrastive_random",
            Condition::ContrastiveAfter => "contrastive_after",
        }
    }

    pub fn has_ai(self) -> bool {
        self != Condition::NoAi
    }

    /// Where the foil comes from when an intervention trial is built.
    pub fn foil_source(self) -> FoilSource {
        match self {
            Condition::NoAi | Condition::Unilateral => FoilSource::None,
            Condition::ContrastivePredicted => FoilSource::Predicted,
            Condition::ContrastiveRandom => FoilSource::Random,
            Condition::ContrastiveAfter => FoilSource::Inputted,
        }
    }

    /// AI support is withheld until the participant commits to a first answer.
    pub fn is_two_phase(self) -> bool {
        self == Condition::ContrastiveAfter
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| StudyError::validation("condition", format!("unknown condition `{s}`")))
    }
}

/// Which of the three blocks a trial belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Pre,
    Intervention,
    Post,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::Pre, Block::Intervention, Block::Post];

    pub fn name(self) -> &'static str {
        match self {
            Block::Pre => "pre",
            Block::Intervention => "intervention",
            Block::Post => "post",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Block::Pre | Block::Post => PRE_SIZE,
            Block::Intervention => cef_core::recommender::INTERVENTION_SIZE,
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Block {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Block::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| StudyError::validation("block", format!("unknown block `{s}`")))
    }
}

pub const PRE_SIZE: usize = 5;
pub const POST_SIZE: usize = 5;
pub const TOTAL_TRIALS: usize = PRE_SIZE + cef_core::recommender::INTERVENTION_SIZE + POST_SIZE;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.name().parse::<Condition>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
        assert!("none".parse::<Condition>().is_err());
        assert_eq!(TOTAL_TRIALS, 24);
    }
}
