use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::ConceptClass;

use super::{ConceptItem, DocSource, Expectation, ExplanationDoc, ExplanationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCode {
    MalformedJson,
    WrongShape,
    UnknownConcept,
    ConceptMismatch,
    ForeignExercise,
    EmptyExplanation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code:?}: {detail}")]
pub struct GuardRejection {
    pub code: RejectCode,
    pub detail: String,
}

fn reject(code: RejectCode, detail: impl Into<String>) -> GuardRejection {
    GuardRejection {
        code,
        detail: detail.into(),
    }
}

/// The JSON payload inside a fenced block, or the outermost bracketed span.
pub fn extract_json(raw: &str) -> Option<&str> {
    if let Some(start) = raw.find("```") {
        let after = &raw[start + 3..];
        // skip an info string such as `json`
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after[body_start..];
        if let Some(end) = body.find("```") {
            return Some(body[..end].trim());
        }
    }
    let open = raw.find(['{', '['])?;
    let close_char = if raw[open..].starts_with('{') {
        '}'
    } else {
        ']'
    };
    let close = raw.rfind(close_char)?;
    (close > open).then(|| &raw[open..=close])
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte spans of whole-word, case-insensitive occurrences of `needle`.
fn occurrences(hay: &str, needle: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if needle.is_empty() {
        return out;
    }
    let mut from = 0;
    while let Some(pos) = hay[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = hay[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !is_word_char(c));
        let after_ok = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            out.push((start, end));
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    out
}

/// First catalog name mentioned in `text` other than the allowed ones.
/// Matches inside an allowed name (for example a shorter id embedded in a
/// longer allowed id) are ignored.
pub fn find_foreign_exercise(
    text: &str,
    catalog_names: &[String],
    allowed: &[&str],
) -> Option<String> {
    let hay = text.to_lowercase();
    let allowed_lower: Vec<String> = allowed.iter().map(|a| a.to_lowercase()).collect();
    let masked: Vec<(usize, usize)> = allowed_lower
        .iter()
        .flat_map(|a| occurrences(&hay, a))
        .collect();
    catalog_names
        .iter()
        .filter(|n| !allowed_lower.contains(&n.to_lowercase()))
        .find(|name| {
            occurrences(&hay, &name.to_lowercase())
                .into_iter()
                .any(|(s, e)| !masked.iter().any(|&(ms, me)| ms <= s && e <= me))
        })
        .cloned()
}

fn concept(name: &str) -> Result<ConceptClass, GuardRejection> {
    ConceptClass::parse_loose(name.trim().trim_end_matches(':')).ok_or_else(|| {
        reject(
            RejectCode::UnknownConcept,
            format!("`{name}` is not Intensity, Goal or Preference"),
        )
    })
}

fn text_of(v: &Value, what: &str) -> Result<String, GuardRejection> {
    let s = v
        .as_str()
        .ok_or_else(|| reject(RejectCode::WrongShape, format!("{what} is not a string")))?;
    if s.trim().is_empty() {
        return Err(reject(
            RejectCode::EmptyExplanation,
            format!("{what} is empty"),
        ));
    }
    Ok(s.trim().to_string())
}

fn parse_contrastive(v: &Value) -> Result<(Option<String>, Vec<ConceptItem>), GuardRejection> {
    let obj = v
        .as_object()
        .ok_or_else(|| reject(RejectCode::WrongShape, "expected a JSON object"))?;
    let high = obj
        .get("high_level_contrastive_explanation")
        .ok_or_else(|| {
            reject(
                RejectCode::WrongShape,
                "missing high_level_contrastive_explanation",
            )
        })?;
    let high = text_of(high, "high_level_contrastive_explanation")?;
    let list = obj
        .get("contrast_concepts")
        .and_then(Value::as_array)
        .ok_or_else(|| reject(RejectCode::WrongShape, "contrast_concepts must be an array"))?;
    let mut items = Vec::with_capacity(list.len());
    for entry in list {
        let map = entry.as_object().filter(|m| m.len() == 1).ok_or_else(|| {
            reject(
                RejectCode::WrongShape,
                "each contrast concept must be a one-key object",
            )
        })?;
        let (k, text) = map.iter().next().expect("one entry");
        items.push(ConceptItem {
            concept: concept(k)?,
            dimension: None,
            text: text_of(text, "concept explanation")?,
        });
    }
    Ok((Some(high), items))
}

fn parse_unilateral(v: &Value) -> Result<(Option<String>, Vec<ConceptItem>), GuardRejection> {
    let list = v
        .as_array()
        .ok_or_else(|| reject(RejectCode::WrongShape, "expected a list of records"))?;
    if list.is_empty() {
        return Err(reject(RejectCode::EmptyExplanation, "no records"));
    }
    let mut items = Vec::with_capacity(list.len());
    for entry in list {
        let map = entry
            .as_object()
            .ok_or_else(|| reject(RejectCode::WrongShape, "record is not an object"))?;
        let (Some(c), Some(text)) = (map.get("concept"), map.get("explanation")) else {
            return Err(reject(
                RejectCode::WrongShape,
                "record needs `concept` and `explanation`",
            ));
        };
        let c = c
            .as_str()
            .ok_or_else(|| reject(RejectCode::WrongShape, "concept is not a string"))?;
        items.push(ConceptItem {
            concept: concept(c)?,
            dimension: None,
            text: text_of(text, "explanation")?,
        });
    }
    Ok((None, items))
}

/// Accept model output only when its shape, concepts and exercise mentions
/// agree with the expectation.
pub fn parse_and_guard(
    raw: &str,
    expected: &Expectation,
    catalog_names: &[String],
) -> Result<ExplanationDoc, GuardRejection> {
    let payload = extract_json(raw)
        .ok_or_else(|| reject(RejectCode::MalformedJson, "no JSON payload found"))?;
    let value: Value = serde_json::from_str(payload)
        .map_err(|e| reject(RejectCode::MalformedJson, e.to_string()))?;
    let (high_level, concept_items) = match expected.kind() {
        ExplanationKind::Contrastive => parse_contrastive(&value)?,
        ExplanationKind::Unilateral => parse_unilateral(&value)?,
    };
    let allowed_classes = expected.allowed_classes();
    if let Some(item) = concept_items
        .iter()
        .find(|i| !allowed_classes.contains(&i.concept))
    {
        return Err(reject(
            RejectCode::ConceptMismatch,
            format!("{} is not among the supported concepts", item.concept),
        ));
    }
    let mut allowed = vec![expected.fact_id()];
    allowed.extend(expected.foil_id());
    for text in high_level
        .iter()
        .chain(concept_items.iter().map(|i| &i.text))
    {
        if let Some(name) = find_foreign_exercise(text, catalog_names, &allowed) {
            return Err(reject(
                RejectCode::ForeignExercise,
                format!("mentions {name}"),
            ));
        }
    }
    Ok(ExplanationDoc {
        kind: expected.kind(),
        high_level,
        concept_items,
        source: DocSource::Llm,
        fact_id: expected.fact_id().to_string(),
        foil_id: expected.foil_id().map(str::to_string),
    })
}
