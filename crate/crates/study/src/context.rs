//! Everything shared by the sessions of one study.

use std::collections::{BTreeMap, BTreeSet};

use cef_core::catalog::Catalog;
use cef_core::domain::{rank_exercises, CharacterRep, ExerciseRep, ScoringModel};
use cef_core::explain::{DomainFactTable, Presenter, Subject};
use cef_core::persona::{render_vignette, sample_character, to_rep, CharacterProfile, DemographicTables, MetConversion};
use cef_core::rank::ModelFile;
use cef_core::seed;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::condition::{Block, POST_SIZE, PRE_SIZE};
use crate::error::{Result, StudyError};
use crate::instruments::Instruments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCharacter {
    pub profile: CharacterProfile,
    pub rep: CharacterRep,
    pub vignette: String,
}

impl StudyCharacter {
    pub fn from_profile(
        profile: CharacterProfile,
        tables: &DemographicTables,
        conversion: MetConversion,
    ) -> Self {
        let rep = to_rep(&profile, tables.goal_mapping(), conversion);
        let vignette = render_vignette(&profile);
        StudyCharacter { profile, rep, vignette }
    }

    pub fn id(&self) -> &str {
        &self.profile.id
    }

    pub fn subject(&self) -> Subject {
        Subject {
            name: self.profile.name.clone(),
            vignette: self.vignette.clone(),
            high_level_goals: self.profile.high_level_goals.clone(),
            rep: self.rep,
        }
    }
}

/// `count` bundled-table characters with ids `char-001`, `char-002`, ...
pub fn generate_characters(tables: &DemographicTables, count: usize, study_seed: u64) -> Vec<CharacterProfile> {
    (0..count)
        .map(|i| {
            let mut p = sample_character(tables, seed::derive(study_seed, i as u64));
            p.id = format!("char-{:03}", i + 1);
            p
        })
        .collect()
}

/// How trial characters are chosen from each block's set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterAssignment {
    /// Every participant sees the first characters of each set, in order.
    #[default]
    Fixed,
    /// Each session draws its characters without replacement from each set.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSets {
    pub pre: Vec<String>,
    pub intervention: Vec<String>,
    pub post: Vec<String>,
}

impl BlockSets {
    pub fn get(&self, block: Block) -> &[String] {
        match block {
            Block::Pre => &self.pre,
            Block::Intervention => &self.intervention,
            Block::Post => &self.post,
        }
    }

    /// Consecutive split of `ids` into 5 / 14 / 5.
    pub fn consecutive(ids: &[String]) -> Result<Self> {
        let n = Block::ALL.iter().map(|b| b.size()).sum::<usize>();
        if ids.len() < n {
            return Err(StudyError::validation("characters", format!("need at least {n}, got {}", ids.len())));
        }
        let inter_end = PRE_SIZE + Block::Intervention.size();
        Ok(BlockSets {
            pre: ids[..PRE_SIZE].to_vec(),
            intervention: ids[PRE_SIZE..inter_end].to_vec(),
            post: ids[inter_end..inter_end + POST_SIZE].to_vec(),
        })
    }
}

/// A trial slot before it is shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTrial {
    pub index: usize,
    pub block: Block,
    pub block_index: usize,
    pub character_id: String,
}

/// Characters, models, drop-down and explanation machinery for one study.
#[derive(Debug, Clone)]
pub struct StudyContext {
    pub study_seed: u64,
    characters: BTreeMap<String, StudyCharacter>,
    blocks: BlockSets,
    pub assignment: CharacterAssignment,
    dropdown: Vec<(String, ExerciseRep)>,
    pub expert: ScoringModel,
    pub human: Option<ScoringModel>,
    pub presenter: Presenter,
    pub instruments: Instruments,
    /// Replaces the per-session error draw with the same trials for everyone.
    pub fixed_error_trials: Option<BTreeSet<usize>>,
    token_secret: String,
}

impl StudyContext {
    pub fn new(
        study_seed: u64,
        characters: Vec<StudyCharacter>,
        blocks: BlockSets,
        dropdown: &Catalog,
        expert: ScoringModel,
        human: Option<ScoringModel>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for c in characters {
            let id = c.id().to_string();
            if map.insert(id.clone(), c).is_some() {
                return Err(StudyError::validation("characters", format!("duplicate id `{id}`")));
            }
        }
        for block in Block::ALL {
            let set = blocks.get(block);
            if set.len() < block.size() {
                return Err(StudyError::validation(
                    format!("blocks.{block}"),
                    format!("needs {} characters, has {}", block.size(), set.len()),
                ));
            }
            if set.iter().collect::<BTreeSet<_>>().len() != set.len() {
                return Err(StudyError::validation(format!("blocks.{block}"), "repeated character"));
            }
            if let Some(id) = set.iter().find(|id| !map.contains_key(*id)) {
                return Err(StudyError::validation(format!("blocks.{block}"), format!("unknown character `{id}`")));
            }
        }
        let mut dd = dropdown.reps();
        dd.sort_by(|a, b| a.0.cmp(&b.0));
        if dd.len() < 3 {
            return Err(StudyError::validation("dropdown", "needs at least 3 exercises"));
        }
        let facts = DomainFactTable::bundled();
        let presenter = Presenter::new(facts, Catalog::bundled().ids());
        Ok(StudyContext {
            study_seed,
            characters: map,
            blocks,
            assignment: CharacterAssignment::Fixed,
            dropdown: dd,
            expert,
            human,
            presenter,
            instruments: Instruments::bundled(),
            fixed_error_trials: None,
            token_secret: format!("study-{study_seed}"),
        })
    }

    /// 24 bundled-table characters, the bundled drop-down and both bundled models.
    pub fn bundled(study_seed: u64) -> Result<Self> {
        let tables = DemographicTables::bundled();
        let total = Block::ALL.iter().map(|b| b.size()).sum();
        let profiles = generate_characters(&tables, total, study_seed);
        let ids: Vec<String> = profiles.iter().map(|p| p.id.clone()).collect();
        let characters = profiles
            .into_iter()
            .map(|p| StudyCharacter::from_profile(p, &tables, MetConversion::Absolute))
            .collect();
        StudyContext::new(
            study_seed,
            characters,
            BlockSets::consecutive(&ids)?,
            &Catalog::bundled_dropdown(),
            ModelFile::bundled_expert().model(),
            Some(ModelFile::bundled_human().model()),
        )
    }

    pub fn with_presenter(mut self, presenter: Presenter) -> Self {
        self.presenter = presenter;
        self
    }

    pub fn with_token_secret(mut self, secret: impl Into<String>) -> Self {
        self.token_secret = secret.into();
        self
    }

    pub fn character(&self, id: &str) -> Result<&StudyCharacter> {
        self.characters
            .get(id)
            .ok_or_else(|| StudyError::Core(cef_core::Error::UnknownCharacter(id.to_string())))
    }

    pub fn characters(&self) -> impl Iterator<Item = &StudyCharacter> {
        self.characters.values()
    }

    pub fn blocks(&self) -> &BlockSets {
        &self.blocks
    }

    /// Drop-down exercises in alphabetical order.
    pub fn dropdown(&self) -> &[(String, ExerciseRep)] {
        &self.dropdown
    }

    pub fn dropdown_ids(&self) -> Vec<String> {
        self.dropdown.iter().map(|(id, _)| id.clone()).collect()
    }

    pub fn exercise(&self, id: &str) -> Option<&ExerciseRep> {
        self.dropdown.iter().find(|(e, _)| e == id).map(|(_, r)| r)
    }

    /// Drop-down ids from best to worst under the expert model.
    pub fn expert_ranking(&self, character_id: &str) -> Result<Vec<String>> {
        let c = self.character(character_id)?;
        Ok(rank_exercises(&c.rep, &self.dropdown, &self.expert)?
            .into_iter()
            .map(|(id, _)| id)
            .collect())
    }

    pub fn block_plan(&self, session_seed: u64) -> Vec<PlannedTrial> {
        let mut plan = Vec::new();
        for (b, block) in Block::ALL.into_iter().enumerate() {
            let set = self.blocks.get(block);
            let chosen: Vec<&String> = match self.assignment {
                CharacterAssignment::Fixed => set.iter().take(block.size()).collect(),
                CharacterAssignment::Shuffled => {
                    let mut rng = seed::rng(seed::derive(session_seed, 0xB10C + b as u64));
                    sample(&mut rng, set.len(), block.size()).into_iter().map(|i| &set[i]).collect()
                }
            };
            for (block_index, id) in chosen.into_iter().enumerate() {
                plan.push(PlannedTrial {
                    index: plan.len(),
                    block,
                    block_index,
                    character_id: id.clone(),
                });
            }
        }
        plan
    }

    /// Bearer token for a session; only its digest is logged.
    pub(crate) fn token_for(&self, session_id: &str) -> String {
        hex::encode(Sha256::digest(format!("{}\0{session_id}", self.token_secret).as_bytes()))
    }
}

pub(crate) fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}
