//! Bundled text assets. Every loader also accepts files on disk with the same format.

pub const DEMOGRAPHICS_CSV: &str = include_str!("../data/demographics.csv");
pub const GOAL_MAPPING_CSV: &str = include_str!("../data/goal_mapping.csv");
pub const VIGNETTE_TEMPLATE: &str = include_str!("../data/vignette.txt");
pub const CATALOG_CSV: &str = include_str!("../data/catalog.csv");
pub const DROPDOWN_TXT: &str = include_str!("../data/dropdown.txt");
pub const EXERCISE_FACTS_CSV: &str = include_str!("../data/exercise_facts.csv");
pub const BENEFIT_FACTS_CSV: &str = include_str!("../data/benefit_facts.csv");
pub const CONTRASTIVE_PROMPT: &str = include_str!("../data/prompts/contrastive.txt");
pub const UNILATERAL_PROMPT: &str = include_str!("../data/prompts/unilateral.txt");
pub const EXPERT_MODEL_JSON: &str = include_str!("../data/models/expert.json");
pub const HUMAN_MODEL_JSON: &str = include_str!("../data/models/human.json");
