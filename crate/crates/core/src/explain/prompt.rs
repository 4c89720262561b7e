use std::collections::BTreeMap;
use std::path::Path;

use crate::data;
use crate::domain::ConceptDim;
use crate::error::{Error, Result};
use crate::template::{self, BRACKETS};

use super::ExplanationKind;

/// Prompt text assets with `[[slot]]` markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub contrastive: String,
    pub unilateral: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            contrastive: data::CONTRASTIVE_PROMPT.to_string(),
            unilateral: data::UNILATERAL_PROMPT.to_string(),
        }
    }
}

impl PromptTemplates {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        Ok(PromptTemplates {
            contrastive: read("contrastive.txt")?,
            unilateral: read("unilateral.txt")?,
        })
    }

    pub fn get(&self, kind: ExplanationKind) -> &str {
        match kind {
            ExplanationKind::Contrastive => &self.contrastive,
            ExplanationKind::Unilateral => &self.unilateral,
        }
    }
}

/// `Goal (cardio), Preference (environment)`, or `none`.
pub fn contributor_list(dims: &[ConceptDim]) -> String {
    if dims.is_empty() {
        return "none".to_string();
    }
    dims.iter()
        .map(|d| format!("{} ({})", d.class(), d.label()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Substitute the slots of the stored template and nothing else.
pub fn build_prompt(
    templates: &PromptTemplates,
    kind: ExplanationKind,
    vignette: &str,
    fact_id: &str,
    foil_id: Option<&str>,
    positive_contributors_fact: &[ConceptDim],
    positive_contributors_foil: &[ConceptDim],
) -> Result<String> {
    let mut values = BTreeMap::new();
    values.insert("vignette", vignette.to_string());
    values.insert("fact", fact_id.to_string());
    if let Some(foil) = foil_id {
        values.insert("foil", foil.to_string());
    }
    if kind == ExplanationKind::Contrastive {
        values.insert(
            "positive_contributors_fact",
            contributor_list(positive_contributors_fact),
        );
        values.insert(
            "positive_contributors_foil",
            contributor_list(positive_contributors_foil),
        );
    }
    template::fill(templates.get(kind), BRACKETS, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrastive_prompt_literals() {
        let t = PromptTemplates::default();
        let p = build_prompt(
            &t,
            ExplanationKind::Contrastive,
            "Ann is 30.",
            "boxing",
            Some("pilates"),
            &[ConceptDim::GoalCardio],
            &[],
        )
        .unwrap();
        assert!(p.starts_with("Ann is 30.\n"));
        assert!(p.contains("Format the response as a JSON object"));
        assert!(p.contains("boxing is better than pilates on the following: Goal (cardio). Whereas, pilates is better than boxing because of: none."));
        assert!(!p.contains("[["));
    }

    #[test]
    fn unilateral_prompt_literals() {
        let t = PromptTemplates::default();
        let p = build_prompt(
            &t,
            ExplanationKind::Unilateral,
            "V",
            "swimming",
            None,
            &[],
            &[],
        )
        .unwrap();
        assert!(p.contains("'concept' and 'explanation' as the keys"));
        assert!(p.contains("why swimming is the best exercise"));
    }

    #[test]
    fn contrastive_needs_foil() {
        let t = PromptTemplates::default();
        let err =
            build_prompt(&t, ExplanationKind::Contrastive, "V", "a", None, &[], &[]).unwrap_err();
        assert!(matches!(err, Error::MissingSlot(s) if s == "foil"));
    }
}
