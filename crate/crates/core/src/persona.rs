//! Fictitious character generation.
//!
//! Demographics are drawn from bundled distribution tables (CSV with
//! `attribute,value,probability` rows), fitness is derived from a
//! non-exercise VO₂max estimate, and high-level goals are mapped onto the
//! representation's goal flags through an explicit mapping table. Swap in
//! real distributions by pointing [`DemographicTables::load`] at another
//! directory with the same two files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data;
use crate::domain::{CharacterRep, Environment, GoalFlags, Social};
use crate::error::{Error, Result};
use crate::template::{self, BRACES};

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 90;
pub const MIN_BMI: f64 = 15.0;
pub const MAX_BMI: f64 = 50.0;

/// Resting oxygen uptake, ml/kg/min per MET.
pub const ML_PER_MET: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighLevelGoal {
    WeightLoss,
    BuildMuscle,
    Flexibility,
    CardiovascularHealth,
}

impl HighLevelGoal {
    pub const ALL: [HighLevelGoal; 4] = [
        HighLevelGoal::WeightLoss,
        HighLevelGoal::BuildMuscle,
        HighLevelGoal::Flexibility,
        HighLevelGoal::CardiovascularHealth,
    ];

    pub fn key(self) -> &'static str {
        match self {
            HighLevelGoal::WeightLoss => "weight_loss",
            HighLevelGoal::BuildMuscle => "build_muscle",
            HighLevelGoal::Flexibility => "flexibility",
            HighLevelGoal::CardiovascularHealth => "cardiovascular_health",
        }
    }

    /// Verb phrase used in vignettes ("wants to ...").
    pub fn phrase(self) -> &'static str {
        match self {
            HighLevelGoal::WeightLoss => "lose weight",
            HighLevelGoal::BuildMuscle => "build muscle",
            HighLevelGoal::Flexibility => "improve flexibility",
            HighLevelGoal::CardiovascularHealth => "improve cardiovascular health",
        }
    }

    /// Noun phrase used in explanations ("... is beneficial for ...").
    pub fn noun(self) -> &'static str {
        match self {
            HighLevelGoal::WeightLoss => "weight loss",
            HighLevelGoal::BuildMuscle => "building muscle",
            HighLevelGoal::Flexibility => "flexibility",
            HighLevelGoal::CardiovascularHealth => "cardiovascular health",
        }
    }
}

impl fmt::Display for HighLevelGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for HighLevelGoal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HighLevelGoal::ALL
            .into_iter()
            .find(|g| g.key() == s.trim())
            .ok_or_else(|| Error::validation("goal", format!("unknown goal `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    /// Coding used by the VO₂max estimate (male = 1, female = 0).
    pub fn code(self) -> u8 {
        match self {
            Sex::Male => 1,
            Sex::Female => 0,
        }
    }
}

/// Representation goal flag targeted by a high-level goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalFlag {
    Cardio,
    Muscle,
    Flexibility,
}

impl FromStr for GoalFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cardio" => Ok(GoalFlag::Cardio),
            "muscle" => Ok(GoalFlag::Muscle),
            "flexibility" => Ok(GoalFlag::Flexibility),
            other => Err(Error::Tables(format!("unknown goal flag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub id: String,
    pub name: String,
    pub age: u32,
    pub sex: Sex,
    pub bmi: f64,
    pub pa_level: u8,
    pub occupation: String,
    pub high_level_goals: BTreeSet<HighLevelGoal>,
    pub environment_pref: Environment,
    pub social_pref: Social,
    /// Derived, ml/kg/min.
    pub vo2max: f64,
}

impl CharacterProfile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        age: u32,
        sex: Sex,
        bmi: f64,
        pa_level: u8,
        occupation: impl Into<String>,
        high_level_goals: BTreeSet<HighLevelGoal>,
        environment_pref: Environment,
        social_pref: Social,
    ) -> Result<Self> {
        if high_level_goals.is_empty() {
            return Err(Error::validation(
                "high_level_goals",
                "at least one goal is required",
            ));
        }
        let vo2max = vo2max(age, sex.code(), bmi, pa_level)?;
        Ok(CharacterProfile {
            id: id.into(),
            name: name.into(),
            age,
            sex,
            bmi,
            pa_level,
            occupation: occupation.into(),
            high_level_goals,
            environment_pref,
            social_pref,
            vo2max,
        })
    }

    /// Re-check invariants, e.g. after deserialising from an untrusted file.
    pub fn validate(&self) -> Result<()> {
        if self.high_level_goals.is_empty() {
            return Err(Error::validation(
                "high_level_goals",
                "at least one goal is required",
            ));
        }
        let expected = vo2max(self.age, self.sex.code(), self.bmi, self.pa_level)?;
        if (expected - self.vo2max).abs() > 1e-9 {
            return Err(Error::validation(
                "vo2max",
                format!("{} does not match estimate {expected}", self.vo2max),
            ));
        }
        Ok(())
    }
}

/// Non-exercise VO₂max estimate in ml/kg/min.
pub fn vo2max(age: u32, sex: u8, bmi: f64, pa: u8) -> Result<f64> {
    if !(MIN_AGE..=MAX_AGE).contains(&age) {
        return Err(Error::validation(
            "age",
            format!("{age} outside {MIN_AGE}..={MAX_AGE}"),
        ));
    }
    if sex > 1 {
        return Err(Error::validation("sex", format!("{sex} is not 0 or 1")));
    }
    if !(MIN_BMI..=MAX_BMI).contains(&bmi) {
        return Err(Error::validation(
            "bmi",
            format!("{bmi} outside {MIN_BMI}..={MAX_BMI}"),
        ));
    }
    if !(1..=7).contains(&pa) {
        return Err(Error::validation("pa_level", format!("{pa} outside 1..=7")));
    }
    Ok(
        48.392 - 0.088 * f64::from(age) + 12.335 * f64::from(sex) - 0.386 * bmi
            + 0.693 * f64::from(pa),
    )
}

/// How a character's VO₂max is turned into the MET capacity compared with exercise METs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetConversion {
    /// VO₂max / 3.5.
    #[default]
    Absolute,
    /// VO₂max / 3.5 − 1 (reserve above rest).
    Reserve,
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Category(String),
    IntRange(u32, u32),
    RealRange(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(Value, f64)>,
}

impl Distribution {
    /// Raw `(value, probability)` rows as written in the table.
    pub fn entries(&self) -> Vec<(String, f64)> {
        self.entries
            .iter()
            .map(|(v, p)| {
                let label = match v {
                    Value::Category(s) => s.clone(),
                    Value::IntRange(a, b) => format!("{a}..{b}"),
                    Value::RealRange(a, b) => format!("{a:?}..{b:?}"),
                };
                (label, *p)
            })
            .collect()
    }

    fn pick_index(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (_, p)) in self.entries.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.entries.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemographicTables {
    distributions: BTreeMap<String, Distribution>,
    goal_mapping: BTreeMap<HighLevelGoal, BTreeSet<GoalFlag>>,
    digest: String,
}

const REQUIRED: [&str; 11] = [
    "sex",
    "age",
    "bmi",
    "pa_level",
    "occupation",
    "name_male",
    "name_female",
    "goal",
    "goal_count",
    "environment",
    "social",
];

#[derive(Deserialize)]
struct TableRow {
    attribute: String,
    value: String,
    probability: f64,
}

#[derive(Deserialize)]
struct MappingRow {
    goal: String,
    flag: String,
}

impl DemographicTables {
    pub fn bundled() -> Self {
        Self::from_csv(data::DEMOGRAPHICS_CSV, data::GOAL_MAPPING_CSV)
            .expect("bundled demographic tables are valid")
    }

    /// Load `demographics.csv` and `goal_mapping.csv` from a directory.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        Self::from_csv(&read("demographics.csv")?, &read("goal_mapping.csv")?)
    }

    pub fn from_csv(demographics: &str, goal_mapping: &str) -> Result<Self> {
        let mut rows: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        let mut reader = csv::Reader::from_reader(demographics.as_bytes());
        for (i, rec) in reader.deserialize::<TableRow>().enumerate() {
            let row = rec.map_err(|e| Error::Parse {
                row: i + 2,
                reason: e.to_string(),
            })?;
            if !(0.0..=1.0).contains(&row.probability) {
                return Err(Error::Parse {
                    row: i + 2,
                    reason: format!("probability {} outside [0,1]", row.probability),
                });
            }
            rows.entry(row.attribute.trim().to_string())
                .or_default()
                .push((row.value.trim().to_string(), row.probability));
        }

        let mut distributions = BTreeMap::new();
        for (attr, entries) in rows {
            let total: f64 = entries.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Tables(format!(
                    "probabilities for `{attr}` sum to {total}"
                )));
            }
            let parsed = entries
                .into_iter()
                .map(|(v, p)| Ok((parse_value(&attr, &v)?, p)))
                .collect::<Result<Vec<_>>>()?;
            distributions.insert(attr, Distribution { entries: parsed });
        }
        for attr in REQUIRED {
            if !distributions.contains_key(attr) {
                return Err(Error::Tables(format!("missing attribute `{attr}`")));
            }
        }
        validate_domains(&distributions)?;

        let mut mapping: BTreeMap<HighLevelGoal, BTreeSet<GoalFlag>> = BTreeMap::new();
        let mut reader = csv::Reader::from_reader(goal_mapping.as_bytes());
        for (i, rec) in reader.deserialize::<MappingRow>().enumerate() {
            let row = rec.map_err(|e| Error::Parse {
                row: i + 2,
                reason: e.to_string(),
            })?;
            let goal: HighLevelGoal = row
                .goal
                .parse()
                .map_err(|_| Error::Tables(format!("unknown goal `{}` in mapping", row.goal)))?;
            mapping.entry(goal).or_default().insert(row.flag.parse()?);
        }
        for g in HighLevelGoal::ALL {
            if mapping.get(&g).is_none_or(|s| s.is_empty()) {
                return Err(Error::Tables(format!("goal mapping does not cover `{g}`")));
            }
        }

        let mut hasher = Sha256::new();
        hasher.update(demographics.as_bytes());
        hasher.update([0u8]);
        hasher.update(goal_mapping.as_bytes());
        let digest = hex::encode(hasher.finalize());

        Ok(DemographicTables {
            distributions,
            goal_mapping: mapping,
            digest,
        })
    }

    pub fn distribution(&self, attribute: &str) -> Option<&Distribution> {
        self.distributions.get(attribute)
    }

    pub fn goal_mapping(&self) -> &BTreeMap<HighLevelGoal, BTreeSet<GoalFlag>> {
        &self.goal_mapping
    }

    /// SHA-256 over both source tables; with a seed list it identifies a character set.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    fn category(&self, attr: &str, rng: &mut impl Rng) -> String {
        let d = &self.distributions[attr];
        match &d.entries[d.pick_index(rng)].0 {
            Value::Category(s) => s.clone(),
            Value::IntRange(a, b) => format!("{a}..{b}"),
            Value::RealRange(a, b) => format!("{a}..{b}"),
        }
    }

    fn int(&self, attr: &str, rng: &mut impl Rng) -> u32 {
        let d = &self.distributions[attr];
        match d.entries[d.pick_index(rng)].0 {
            Value::IntRange(a, b) => rng.random_range(a..=b),
            Value::RealRange(a, b) => rng.random_range(a..=b).round() as u32,
            Value::Category(ref s) => s.parse().unwrap_or_default(),
        }
    }

    fn real(&self, attr: &str, rng: &mut impl Rng) -> f64 {
        let d = &self.distributions[attr];
        match d.entries[d.pick_index(rng)].0 {
            Value::RealRange(a, b) => rng.random_range(a..=b),
            Value::IntRange(a, b) => f64::from(rng.random_range(a..=b)),
            Value::Category(ref s) => s.parse().unwrap_or_default(),
        }
    }
}

fn parse_value(attr: &str, raw: &str) -> Result<Value> {
    if let Some((lo, hi)) = raw.split_once("..") {
        let bad = || Error::Tables(format!("bad range `{raw}` for `{attr}`"));
        if lo.contains('.') || hi.contains('.') {
            let (a, b): (f64, f64) = (
                lo.parse().map_err(|_| bad())?,
                hi.parse().map_err(|_| bad())?,
            );
            if a > b {
                return Err(bad());
            }
            return Ok(Value::RealRange(a, b));
        }
        let (a, b): (u32, u32) = (
            lo.parse().map_err(|_| bad())?,
            hi.parse().map_err(|_| bad())?,
        );
        if a > b {
            return Err(bad());
        }
        return Ok(Value::IntRange(a, b));
    }
    Ok(Value::Category(raw.to_string()))
}

fn validate_domains(d: &BTreeMap<String, Distribution>) -> Result<()> {
    let check = |attr: &str, ok: &dyn Fn(&Value) -> bool| -> Result<()> {
        for (v, _) in &d[attr].entries {
            if !ok(v) {
                return Err(Error::Tables(format!("value {v:?} invalid for `{attr}`")));
            }
        }
        Ok(())
    };
    let cat_in = |allowed: &'static [&'static str]| move |v: &Value| matches!(v, Value::Category(s) if allowed.contains(&s.as_str()));
    check("sex", &cat_in(&["male", "female"]))?;
    check("environment", &cat_in(&["indoor", "outdoor"]))?;
    check("social", &cat_in(&["individual", "group"]))?;
    check(
        "goal",
        &|v| matches!(v, Value::Category(s) if s.parse::<HighLevelGoal>().is_ok()),
    )?;
    check(
        "goal_count",
        &|v| matches!(v, Value::Category(s) if matches!(s.parse::<usize>(), Ok(1..=4))),
    )?;
    check(
        "pa_level",
        &|v| matches!(v, Value::Category(s) if matches!(s.parse::<u8>(), Ok(1..=7))),
    )?;
    check("age", &|v| match v {
        Value::IntRange(a, b) => *a >= MIN_AGE && *b <= MAX_AGE,
        Value::Category(s) => s
            .parse::<u32>()
            .is_ok_and(|a| (MIN_AGE..=MAX_AGE).contains(&a)),
        Value::RealRange(..) => false,
    })?;
    check("bmi", &|v| match v {
        Value::RealRange(a, b) => *a >= MIN_BMI && *b <= MAX_BMI,
        Value::Category(s) => s
            .parse::<f64>()
            .is_ok_and(|b| (MIN_BMI..=MAX_BMI).contains(&b)),
        Value::IntRange(a, b) => f64::from(*a) >= MIN_BMI && f64::from(*b) <= MAX_BMI,
    })?;
    Ok(())
}

/// Draw one character; fully determined by `(tables, seed)`.
pub fn sample_character(tables: &DemographicTables, seed: u64) -> CharacterProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sex = match tables.category("sex", &mut rng).as_str() {
        "male" => Sex::Male,
        _ => Sex::Female,
    };
    let name = tables.category(
        match sex {
            Sex::Male => "name_male",
            Sex::Female => "name_female",
        },
        &mut rng,
    );
    let age = tables.int("age", &mut rng);
    let bmi = (tables.real("bmi", &mut rng) * 10.0).round() / 10.0;
    let pa_level = tables.int("pa_level", &mut rng) as u8;
    let occupation = tables.category("occupation", &mut rng);

    let wanted: usize = tables.category("goal_count", &mut rng).parse().unwrap_or(1);
    let mut goals = BTreeSet::new();
    // Bounded retries keep sampling total even for tables with zero-probability goals.
    for _ in 0..64 {
        if goals.len() >= wanted {
            break;
        }
        if let Ok(g) = tables.category("goal", &mut rng).parse::<HighLevelGoal>() {
            goals.insert(g);
        }
    }
    if goals.is_empty() {
        goals.insert(HighLevelGoal::WeightLoss);
    }

    let environment_pref = tables
        .category("environment", &mut rng)
        .parse()
        .unwrap_or(Environment::Indoor);
    let social_pref = tables
        .category("social", &mut rng)
        .parse()
        .unwrap_or(Social::Individual);

    CharacterProfile::new(
        format!("char-{seed}"),
        name,
        age,
        sex,
        bmi.clamp(MIN_BMI, MAX_BMI),
        pa_level,
        occupation,
        goals,
        environment_pref,
        social_pref,
    )
    .expect("validated tables only produce in-range attributes")
}

/// Characters for the given seeds, in order.
pub fn sample_characters(
    tables: &DemographicTables,
    seeds: impl IntoIterator<Item = u64>,
) -> Vec<CharacterProfile> {
    seeds
        .into_iter()
        .map(|s| sample_character(tables, s))
        .collect()
}

/// Map a profile into representation space.
pub fn to_rep(
    profile: &CharacterProfile,
    mapping: &BTreeMap<HighLevelGoal, BTreeSet<GoalFlag>>,
    conversion: MetConversion,
) -> CharacterRep {
    let mets = profile.vo2max / ML_PER_MET;
    let met_capacity = match conversion {
        MetConversion::Absolute => mets,
        MetConversion::Reserve => mets - 1.0,
    }
    .max(1.0);
    let mut goals = GoalFlags::default();
    for g in &profile.high_level_goals {
        for flag in mapping.get(g).into_iter().flatten() {
            match flag {
                GoalFlag::Cardio => goals.cardio = true,
                GoalFlag::Muscle => goals.muscle = true,
                GoalFlag::Flexibility => goals.flexibility = true,
            }
        }
    }
    CharacterRep {
        met_capacity,
        goals,
        environment: profile.environment_pref,
        social: profile.social_pref,
    }
}

/// Vignette renderer backed by a `{{slot}}` text template.
#[derive(Debug, Clone)]
pub struct VignetteTemplate {
    text: String,
}

impl Default for VignetteTemplate {
    fn default() -> Self {
        VignetteTemplate {
            text: data::VIGNETTE_TEMPLATE.trim_end().to_string(),
        }
    }
}

impl VignetteTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        VignetteTemplate { text: text.into() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Ok(VignetteTemplate::new(text.trim_end()))
    }

    pub fn render(&self, p: &CharacterProfile) -> Result<String> {
        let mut slots = BTreeMap::new();
        slots.insert("name", p.name.clone());
        slots.insert("age", p.age.to_string());
        let article = if p.age.to_string().starts_with('8') || p.age == 18 || p.age == 11 {
            "an"
        } else {
            "a"
        };
        slots.insert("age_phrase", format!("{article} {}-year-old", p.age));
        slots.insert("occupation", p.occupation.clone());
        slots.insert("bmi", format!("{:.1}", p.bmi));
        slots.insert("activity", activity_phrase(p.pa_level).to_string());
        let goals: Vec<&str> = p.high_level_goals.iter().map(|g| g.phrase()).collect();
        slots.insert("goals", join_and(&goals));
        slots.insert("environment", p.environment_pref.to_string());
        slots.insert(
            "social",
            match p.social_pref {
                Social::Group => "in a group",
                Social::Individual => "individually",
            }
            .to_string(),
        );
        template::fill(&self.text, BRACES, &slots)
    }
}

/// Render with the bundled template.
pub fn render_vignette(p: &CharacterProfile) -> String {
    VignetteTemplate::default()
        .render(p)
        .expect("bundled vignette template only uses known slots")
}

fn activity_phrase(pa: u8) -> &'static str {
    match pa {
        1 => "is almost completely inactive",
        2 => "is only occasionally active",
        3 => "does light activity a few times a week",
        4 => "does moderate activity on a regular basis",
        5 => "exercises at a moderate level most days",
        6 => "does vigorous exercise a few times a week",
        _ => "trains vigorously almost every day",
    }
}

pub(crate) fn join_and(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => (*one).to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}
