//! Questionnaire definitions and response validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::condition::Condition;
use crate::error::{Result, StudyError};

const BUNDLED: &str = include_str!("../data/instruments.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Imi,
    Nfc,
    Aot,
    Demographics,
}

impl Instrument {
    pub const ALL: [Instrument; 4] = [Instrument::Imi, Instrument::Nfc, Instrument::Aot, Instrument::Demographics];

    pub fn name(self) -> &'static str {
        match self {
            Instrument::Imi => "imi",
            Instrument::Nfc => "nfc",
            Instrument::Aot => "aot",
            Instrument::Demographics => "demographics",
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Instrument {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self> {
        Instrument::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| StudyError::validation("instrument", format!("unknown instrument `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PreTask,
    PostTask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ItemKind {
    Likert,
    Integer { min: i64, max: i64 },
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct: Option<String>,
    #[serde(default)]
    pub reverse: bool,
    /// Asked only of participants who saw AI support.
    #[serde(default)]
    pub ai_only: bool,
    pub kind: ItemKind,
    /// Wording shown to participants; supplied per deployment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentDef {
    pub instrument: Instrument,
    pub stage: Stage,
    pub items: Vec<ItemDef>,
}

impl InstrumentDef {
    /// Items this condition is asked, in definition order.
    pub fn items_for(&self, condition: Condition) -> impl Iterator<Item = &ItemDef> {
        self.items.iter().filter(move |i| condition.has_ai() || !i.ai_only)
    }

    pub fn item(&self, id: &str) -> Option<&ItemDef> {
        self.items.iter().find(|i| i.id == id)
    }
}

/// Validated answers to one instrument.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Responses {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub likert: BTreeMap<String, u8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruments {
    pub scale_max: u8,
    pub instruments: Vec<InstrumentDef>,
}

impl Default for Instruments {
    fn default() -> Self {
        Instruments::bundled()
    }
}

impl Instruments {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled instrument definitions are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let defs: Instruments = serde_json::from_str(text)?;
        for i in Instrument::ALL {
            if !defs.instruments.iter().any(|d| d.instrument == i) {
                return Err(StudyError::validation("instruments", format!("no definition for {i}")));
            }
        }
        if defs.scale_max < 2 {
            return Err(StudyError::validation("scale_max", "must be at least 2"));
        }
        Ok(defs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        Self::from_json(&std::fs::read_to_string(p).map_err(|e| StudyError::io(p, e))?)
    }

    pub fn get(&self, instrument: Instrument) -> &InstrumentDef {
        self.instruments
            .iter()
            .find(|d| d.instrument == instrument)
            .expect("every instrument is defined")
    }

    pub fn at_stage(&self, stage: Stage) -> Vec<Instrument> {
        let mut v: Vec<Instrument> = self
            .instruments
            .iter()
            .filter(|d| d.stage == stage)
            .map(|d| d.instrument)
            .collect();
        v.sort();
        v
    }

    /// Reverse-coded value on this scale.
    pub fn reverse(&self, v: u8) -> u8 {
        self.scale_max + 1 - v
    }

    /// Check a raw submission: every expected item present, nothing extra, values in range.
    pub fn validate(&self, instrument: Instrument, condition: Condition, items: &BTreeMap<String, Value>) -> Result<Responses> {
        let def = self.get(instrument);
        for key in items.keys() {
            match def.item(key) {
                None => return Err(StudyError::validation(format!("items.{key}"), format!("not an item of {instrument}"))),
                Some(item) if item.ai_only && !condition.has_ai() => {
                    return Err(StudyError::validation(
                        format!("items.{key}"),
                        format!("not asked in the {condition} condition"),
                    ))
                }
                Some(_) => {}
            }
        }
        let mut out = Responses::default();
        for item in def.items_for(condition) {
            let field = format!("items.{}", item.id);
            let v = items.get(&item.id).ok_or_else(|| StudyError::validation(&field, "missing"))?;
            match &item.kind {
                ItemKind::Likert => {
                    let n = v
                        .as_u64()
                        .filter(|n| (1..=u64::from(self.scale_max)).contains(n))
                        .ok_or_else(|| StudyError::validation(&field, format!("expected an integer 1..={}", self.scale_max)))?;
                    out.likert.insert(item.id.clone(), n as u8);
                }
                ItemKind::Integer { min, max } => {
                    let n = v
                        .as_i64()
                        .filter(|n| (*min..=*max).contains(n))
                        .ok_or_else(|| StudyError::validation(&field, format!("expected an integer {min}..={max}")))?;
                    out.values.insert(item.id.clone(), n.to_string());
                }
                ItemKind::Text => {
                    let s = v
                        .as_str()
                        .map(str::trim)
                        .filter(|s| !s.is_empty() && s.len() <= 200)
                        .ok_or_else(|| StudyError::validation(&field, "expected non-empty text of at most 200 bytes"))?;
                    out.values.insert(item.id.clone(), s.to_string());
                }
            }
        }
        Ok(out)
    }
}
