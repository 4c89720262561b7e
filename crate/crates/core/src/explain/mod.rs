//! Explanation documents: deterministic template rendering, prompt
//! construction for an external language model, and a structural guard that
//! decides whether model output may be shown.

mod facts;
mod guard;
pub mod llm;
mod presenter;
mod prompt;
mod render;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::contrast::ContrastReport;
use crate::domain::{CharacterRep, ConceptClass, ConceptDim};
use crate::persona::HighLevelGoal;

pub use facts::DomainFactTable;
pub use guard::{extract_json, find_foreign_exercise, parse_and_guard, GuardRejection, RejectCode};
pub use presenter::{Presented, Presenter};
pub use prompt::{build_prompt, contributor_list, PromptTemplates};
pub use render::{render_contrastive_template, render_unilateral_template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationKind {
    Unilateral,
    Contrastive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocSource {
    Template,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptItem {
    pub concept: ConceptClass,
    /// Present on template output; model output only names the class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<ConceptDim>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationDoc {
    pub kind: ExplanationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_level: Option<String>,
    pub concept_items: Vec<ConceptItem>,
    pub source: DocSource,
    pub fact_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foil_id: Option<String>,
}

/// What the character looks like to the renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub name: String,
    pub vignette: String,
    pub high_level_goals: BTreeSet<HighLevelGoal>,
    pub rep: CharacterRep,
}

/// The facts an explanation must be consistent with.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    Contrastive(ContrastReport),
    Unilateral {
        fact_id: String,
        /// Dimensions with positive weighted contribution for the fact.
        positive: BTreeSet<ConceptDim>,
    },
}

impl Expectation {
    pub fn kind(&self) -> ExplanationKind {
        match self {
            Expectation::Contrastive(_) => ExplanationKind::Contrastive,
            Expectation::Unilateral { .. } => ExplanationKind::Unilateral,
        }
    }

    pub fn fact_id(&self) -> &str {
        match self {
            Expectation::Contrastive(r) => &r.fact_id,
            Expectation::Unilateral { fact_id, .. } => fact_id,
        }
    }

    pub fn foil_id(&self) -> Option<&str> {
        match self {
            Expectation::Contrastive(r) => Some(&r.foil_id),
            Expectation::Unilateral { .. } => None,
        }
    }

    pub fn allowed_dims(&self) -> &BTreeSet<ConceptDim> {
        match self {
            Expectation::Contrastive(r) => &r.s_fact,
            Expectation::Unilateral { positive, .. } => positive,
        }
    }

    pub fn allowed_classes(&self) -> BTreeSet<ConceptClass> {
        self.allowed_dims().iter().map(|d| d.class()).collect()
    }
}

impl ExplanationDoc {
    /// Every text the participant would read.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.high_level
            .as_deref()
            .into_iter()
            .chain(self.concept_items.iter().map(|i| i.text.as_str()))
    }

    /// Check the document against its expectation. Returns the first violated rule.
    pub fn check(&self, expected: &Expectation, catalog_names: &[String]) -> Result<(), String> {
        if self.kind != expected.kind() {
            return Err(format!(
                "kind {:?} but expected {:?}",
                self.kind,
                expected.kind()
            ));
        }
        if self.fact_id != expected.fact_id() || self.foil_id.as_deref() != expected.foil_id() {
            return Err("fact/foil ids differ from the expectation".into());
        }
        let classes = expected.allowed_classes();
        for item in &self.concept_items {
            if !classes.contains(&item.concept) {
                return Err(format!("concept {} not allowed", item.concept));
            }
            if let Some(dim) = item.dimension {
                if !expected.allowed_dims().contains(&dim) || dim.class() != item.concept {
                    return Err(format!("dimension {dim} not allowed"));
                }
            }
            if item.text.trim().is_empty() {
                return Err("empty item text".into());
            }
        }
        if self.kind == ExplanationKind::Contrastive
            && self
                .high_level
                .as_deref()
                .is_none_or(|h| h.trim().is_empty())
        {
            return Err("contrastive document without a high-level sentence".into());
        }
        if self.concept_items.is_empty() && self.high_level.is_none() {
            return Err("document is empty".into());
        }
        let mut allowed = vec![expected.fact_id()];
        allowed.extend(expected.foil_id());
        for text in self.texts() {
            if let Some(name) = find_foreign_exercise(text, catalog_names, &allowed) {
                return Err(format!("mentions {name}"));
            }
        }
        Ok(())
    }
}

/// Upper-case the first character.
pub(crate) fn sentence_case(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
