use std::collections::BTreeSet;

use crate::contrast::ContrastReport;
use crate::domain::{joint_rep, ConceptDim, ExerciseRep, ScoringModel};
use crate::error::Result;
use crate::persona::join_and;

use super::{
    sentence_case, ConceptItem, DocSource, DomainFactTable, ExplanationDoc, ExplanationKind,
    Subject,
};

fn labels(dims: &BTreeSet<ConceptDim>) -> String {
    let v: Vec<&str> = dims.iter().map(|d| d.label()).collect();
    join_and(&v)
}

/// High-level acknowledgment of the foil followed by one bullet per
/// dimension on which the fact is ahead.
pub fn render_contrastive_template(
    subject: &Subject,
    r: &ContrastReport,
    facts: &DomainFactTable,
) -> Result<ExplanationDoc> {
    let (fact, foil, name) = (&r.fact_id, &r.foil_id, &subject.name);
    let high_level = match (r.s_fact.is_empty(), r.s_foil.is_empty()) {
        (false, true) => format!(
            "{} is also a good choice, but {fact} is the better fit for {name} on {}.",
            sentence_case(foil),
            labels(&r.s_fact)
        ),
        (false, false) => format!(
            "Although {foil} has the edge on {}, {fact} is the better fit for {name} on {}.",
            labels(&r.s_foil),
            labels(&r.s_fact)
        ),
        (true, false) => format!(
            "{} has the edge on {}, while {fact} is also a reasonable option for {name}.",
            sentence_case(foil),
            labels(&r.s_foil)
        ),
        (true, true) => format!(
            "{} is also a good choice, and {fact} suits {name} equally well.",
            sentence_case(foil)
        ),
    };
    let concept_items = r
        .s_fact
        .iter()
        .map(|&dim| {
            let text = format!(
                "{} {}, whereas {foil} {}; {}.",
                sentence_case(fact),
                facts.exercise_clause(fact, dim)?,
                facts.exercise_clause(foil, dim)?,
                facts.benefit_clause(subject, dim)?
            );
            Ok(ConceptItem {
                concept: dim.class(),
                dimension: Some(dim),
                text,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExplanationDoc {
        kind: ExplanationKind::Contrastive,
        high_level: Some(high_level),
        concept_items,
        source: DocSource::Template,
        fact_id: fact.clone(),
        foil_id: Some(foil.clone()),
    })
}

/// Dimensions where `w[c] · g(x, fact)[c]` is strictly positive.
pub(crate) fn positive_dims(
    subject: &Subject,
    fact: &ExerciseRep,
    expert: &ScoringModel,
) -> BTreeSet<ConceptDim> {
    let g = joint_rep(&subject.rep, fact);
    ConceptDim::ALL
        .into_iter()
        .filter(|&d| expert.weights[d.index()] * g[d] > 0.0)
        .collect()
}

/// One item per positively contributing dimension, ordered by concept class.
pub fn render_unilateral_template(
    subject: &Subject,
    fact_id: &str,
    fact: &ExerciseRep,
    expert: &ScoringModel,
    facts: &DomainFactTable,
) -> Result<ExplanationDoc> {
    let positive = positive_dims(subject, fact, expert);
    let concept_items = positive
        .iter()
        .map(|&dim| {
            Ok(ConceptItem {
                concept: dim.class(),
                dimension: Some(dim),
                text: format!(
                    "{} {}; {}.",
                    sentence_case(fact_id),
                    facts.exercise_clause(fact_id, dim)?,
                    facts.benefit_clause(subject, dim)?
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let high_level = concept_items.is_empty().then(|| {
        format!(
            "{} is a reasonable option for {}.",
            sentence_case(fact_id),
            subject.name
        )
    });
    Ok(ExplanationDoc {
        kind: ExplanationKind::Unilateral,
        high_level,
        concept_items,
        source: DocSource::Template,
        fact_id: fact_id.to_string(),
        foil_id: None,
    })
}
