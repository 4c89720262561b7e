use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contrast::ContrastReport;
use crate::domain::{ExerciseRep, ScoringModel};
use crate::error::Result;

use super::llm::{CompletionRequest, TextCompletion};
use super::render::positive_dims;
use super::{
    build_prompt, parse_and_guard, render_contrastive_template, render_unilateral_template,
    DomainFactTable, Expectation, ExplanationDoc, ExplanationKind, GuardRejection, PromptTemplates,
    Subject,
};

/// An explanation and how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presented {
    pub doc: ExplanationDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<GuardRejection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport_error: Option<String>,
}

/// Template rendering by default; when a completion client is attached its
/// output is used only if it passes the guard.
#[derive(Clone)]
pub struct Presenter {
    facts: DomainFactTable,
    prompts: PromptTemplates,
    catalog_names: Vec<String>,
    llm: Option<Arc<dyn TextCompletion>>,
}

impl std::fmt::Debug for Presenter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Presenter")
            .field("catalog_names", &self.catalog_names.len())
            .field("llm", &self.llm.is_some())
            .finish()
    }
}

impl Presenter {
    pub fn new(facts: DomainFactTable, catalog_names: Vec<String>) -> Self {
        Presenter {
            facts,
            prompts: PromptTemplates::default(),
            catalog_names,
            llm: None,
        }
    }

    pub fn with_prompts(mut self, prompts: PromptTemplates) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_llm(mut self, client: Arc<dyn TextCompletion>) -> Self {
        self.llm = Some(client);
        self
    }

    pub fn catalog_names(&self) -> &[String] {
        &self.catalog_names
    }

    pub fn contrastive(&self, subject: &Subject, report: &ContrastReport) -> Result<Presented> {
        let fallback = render_contrastive_template(subject, report, &self.facts)?;
        let fact_dims: Vec<_> = report.s_fact.iter().copied().collect();
        let foil_dims: Vec<_> = report.s_foil.iter().copied().collect();
        let prompt = build_prompt(
            &self.prompts,
            ExplanationKind::Contrastive,
            &subject.vignette,
            &report.fact_id,
            Some(&report.foil_id),
            &fact_dims,
            &foil_dims,
        )?;
        Ok(self.via_llm(prompt, &Expectation::Contrastive(report.clone()), fallback))
    }

    pub fn unilateral(
        &self,
        subject: &Subject,
        fact_id: &str,
        fact: &ExerciseRep,
        expert: &ScoringModel,
    ) -> Result<Presented> {
        let fallback = render_unilateral_template(subject, fact_id, fact, expert, &self.facts)?;
        let prompt = build_prompt(
            &self.prompts,
            ExplanationKind::Unilateral,
            &subject.vignette,
            fact_id,
            None,
            &[],
            &[],
        )?;
        let expected = Expectation::Unilateral {
            fact_id: fact_id.to_string(),
            positive: positive_dims(subject, fact, expert),
        };
        Ok(self.via_llm(prompt, &expected, fallback))
    }

    fn via_llm(
        &self,
        prompt: String,
        expected: &Expectation,
        fallback: ExplanationDoc,
    ) -> Presented {
        let Some(client) = &self.llm else {
            return Presented {
                doc: fallback,
                prompt: None,
                rejection: None,
                transport_error: None,
            };
        };
        match client.complete(&CompletionRequest::new(prompt.clone())) {
            Err(e) => Presented {
                doc: fallback,
                prompt: Some(prompt),
                rejection: None,
                transport_error: Some(e.to_string()),
            },
            Ok(raw) => match parse_and_guard(&raw, expected, &self.catalog_names) {
                Ok(doc) => Presented {
                    doc,
                    prompt: Some(prompt),
                    rejection: None,
                    transport_error: None,
                },
                Err(rejection) => Presented {
                    doc: fallback,
                    prompt: Some(prompt),
                    rejection: Some(rejection),
                    transport_error: None,
                },
            },
        }
    }
}
