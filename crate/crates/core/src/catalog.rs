//! Exercise catalog loading and representative-exercise selection.
//!
//! Representatives are chosen by scoring every exercise for a set of
//! characters, clustering the resulting score profiles (Ward linkage on a
//! correlation distance) and keeping the member nearest each cluster mean.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::domain::{
    score, CharacterRep, Environment, ExerciseRep, GoalFlags, ScoringModel, Social,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityClass {
    Light,
    Moderate,
    Vigorous,
}

impl IntensityClass {
    pub fn admits(self, met: f64) -> bool {
        match self {
            IntensityClass::Light => met < 3.0,
            IntensityClass::Moderate => (3.0..6.0).contains(&met),
            IntensityClass::Vigorous => met >= 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseEntry {
    pub id: String,
    pub rep: ExerciseRep,
    /// Accessibility flag, preferred when picking cluster representatives.
    pub common: bool,
    pub intensity: Option<IntensityClass>,
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    id: String,
    met: f64,
    cardio: u8,
    muscle: u8,
    flexibility: u8,
    environment: String,
    social: String,
    common: u8,
    #[serde(default)]
    intensity: Option<String>,
}

fn flag(row: usize, name: &str, v: u8) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::Parse {
            row,
            reason: format!("{name} must be 0 or 1, got {other}"),
        }),
    }
}

impl CatalogRow {
    fn into_entry(self, row: usize) -> Result<ExerciseEntry> {
        let parse_err = |e: Error| Error::Parse {
            row,
            reason: e.to_string(),
        };
        let id = self.id.trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row,
                reason: "empty id".into(),
            });
        }
        let goals = GoalFlags {
            cardio: flag(row, "cardio", self.cardio)?,
            muscle: flag(row, "muscle", self.muscle)?,
            flexibility: flag(row, "flexibility", self.flexibility)?,
        };
        let environment: Environment = self.environment.parse().map_err(parse_err)?;
        let social: Social = self.social.parse().map_err(parse_err)?;
        let rep = ExerciseRep::new(self.met, goals, environment, social).map_err(parse_err)?;
        let intensity = match self.intensity.as_deref().map(str::trim) {
            None | Some("") => None,
            Some("light") => Some(IntensityClass::Light),
            Some("moderate") => Some(IntensityClass::Moderate),
            Some("vigorous") => Some(IntensityClass::Vigorous),
            Some(other) => {
                return Err(Error::Parse {
                    row,
                    reason: format!("unknown intensity class `{other}`"),
                })
            }
        };
        if let Some(class) = intensity {
            if !class.admits(self.met) {
                return Err(Error::Parse {
                    row,
                    reason: format!("{} METs inconsistent with {class:?}", self.met),
                });
            }
        }
        Ok(ExerciseEntry {
            id,
            rep,
            common: flag(row, "common", self.common)?,
            intensity,
        })
    }
}

/// Validated list of exercises with unique ids, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    entries: Vec<ExerciseEntry>,
}

impl Catalog {
    pub fn new(entries: Vec<ExerciseEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        Ok(Catalog { entries })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (i, rec) in reader.deserialize::<CatalogRow>().enumerate() {
            // Header is row 1.
            let row = i + 2;
            let raw = rec.map_err(|e| Error::Parse {
                row,
                reason: e.to_string(),
            })?;
            entries.push(raw.into_entry(row)?);
        }
        Catalog::new(entries)
    }

    pub fn bundled() -> Self {
        Catalog::from_csv_str(data::CATALOG_CSV).expect("bundled catalog is valid")
    }

    /// The bundled seven-exercise drop-down subset, alphabetical.
    pub fn bundled_dropdown() -> Self {
        let ids = parse_id_list(data::DROPDOWN_TXT);
        Catalog::bundled()
            .subset(&ids)
            .expect("bundled drop-down ids exist in the bundled catalog")
    }

    pub fn entries(&self) -> &[ExerciseEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ExerciseEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// `(id, rep)` pairs, the shape consumed by ranking functions.
    pub fn reps(&self) -> Vec<(String, ExerciseRep)> {
        self.entries.iter().map(|e| (e.id.clone(), e.rep)).collect()
    }

    /// Entries for the given ids, sorted alphabetically.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Catalog> {
        let mut picked = ids
            .iter()
            .map(|id| {
                self.get(id.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::UnknownExercise(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        picked.sort_by(|a, b| a.id.cmp(&b.id));
        Catalog::new(picked)
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    Catalog::from_csv_str(&text)
}

/// Newline-separated ids; blank lines and `#` comments ignored.
pub fn parse_id_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn load_id_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    Ok(parse_id_list(&text))
}

/// Exercise × character score matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreProfileMatrix {
    pub exercise_ids: Vec<String>,
    pub common: Vec<bool>,
    pub character_ids: Vec<String>,
    /// `rows[i][j]` = score of exercise `i` for character `j`.
    pub rows: Vec<Vec<f64>>,
}

impl ScoreProfileMatrix {
    pub fn new(
        exercise_ids: Vec<String>,
        common: Vec<bool>,
        character_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != exercise_ids.len() || common.len() != exercise_ids.len() {
            return Err(Error::validation(
                "profiles",
                "row count does not match exercise count",
            ));
        }
        if rows.iter().any(|r| r.len() != character_ids.len()) {
            return Err(Error::validation(
                "profiles",
                "column count does not match character count",
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("profiles", "non-finite score"));
        }
        Ok(ScoreProfileMatrix {
            exercise_ids,
            common,
            character_ids,
            rows,
        })
    }
}

pub fn score_profiles<S: AsRef<str>>(
    catalog: &Catalog,
    characters: &[(S, CharacterRep)],
    model: &ScoringModel,
) -> Result<ScoreProfileMatrix> {
    if characters.is_empty() {
        return Err(Error::validation(
            "characters",
            "need at least one character",
        ));
    }
    let rows = catalog
        .entries()
        .iter()
        .map(|e| {
            characters
                .iter()
                .map(|(_, x)| score(x, &e.rep, model))
                .collect()
        })
        .collect();
    ScoreProfileMatrix::new(
        catalog.ids(),
        catalog.entries().iter().map(|e| e.common).collect(),
        characters
            .iter()
            .map(|(id, _)| id.as_ref().to_string())
            .collect(),
        rows,
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    #[default]
    Pearson,
    Spearman,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Average ranks (1-based), ties share their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Symmetric `1 − r` matrix between exercise profiles.
pub fn correlation_distance(
    profiles: &ScoreProfileMatrix,
    method: Correlation,
) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = match method {
        Correlation::Pearson => profiles.rows.clone(),
        Correlation::Spearman => profiles.rows.iter().map(|r| ranks(r)).collect(),
    };
    for (i, r) in rows.iter().enumerate() {
        let first = r.first().copied().unwrap_or(0.0);
        if r.iter()
            .all(|v| (v - first).abs() <= f64::EPSILON * first.abs().max(1.0))
        {
            return Err(Error::DegenerateProfile(profiles.exercise_ids[i].clone()));
        }
    }
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (1.0 - pearson(&rows[i], &rows[j])).max(0.0);
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    Ok(d)
}

/// One agglomeration step. Cluster ids follow the SciPy convention:
/// leaves are `0..n`, the cluster created by merge `t` is `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub cost: f64,
    pub size: usize,
}

/// Full Ward dendrogram over a dissimilarity matrix (Lance–Williams update).
pub fn ward_linkage(dist: &[Vec<f64>]) -> Vec<Merge> {
    let n = dist.len();
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    let mut size = vec![1usize; n];
    let mut label: Vec<usize> = (0..n).collect();
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                if best.is_none_or(|(_, _, c)| d[i][j] < c) {
                    best = Some((i, j, d[i][j]));
                }
            }
        }
        let (i, j, cost) = best.expect("at least two active clusters");
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for m in 0..n {
            if !active[m] || m == i || m == j {
                continue;
            }
            let nm = size[m] as f64;
            let sq = ((ni + nm) * d[i][m].powi(2) + (nj + nm) * d[j][m].powi(2)
                - nm * cost.powi(2))
                / (ni + nj + nm);
            let v = sq.max(0.0).sqrt();
            d[i][m] = v;
            d[m][i] = v;
        }
        let (a, b) = (label[i].min(label[j]), label[i].max(label[j]));
        size[i] += size[j];
        active[j] = false;
        label[i] = n + step;
        merges.push(Merge {
            left: a,
            right: b,
            cost,
            size: size[i],
        });
    }
    merges
}

/// Flat clusters (as sorted member-index lists) after cutting the dendrogram at `k`.
pub fn cut(merges: &[Merge], n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut members: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    for (t, m) in merges.iter().take(n.saturating_sub(k)).enumerate() {
        let mut a = members.remove(&m.left).unwrap_or_default();
        a.extend(members.remove(&m.right).unwrap_or_default());
        a.sort_unstable();
        members.insert(n + t, a);
    }
    let mut out: Vec<Vec<usize>> = members.into_values().collect();
    out.sort();
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub correlation: Correlation,
}

const NEAR_TIE: f64 = 1e-9;

/// Pick `k` representative exercise ids, returned alphabetically.
pub fn cluster_and_select(profiles: &ScoreProfileMatrix, k: usize) -> Result<Vec<String>> {
    cluster_and_select_with(profiles, k, ClusterOptions::default())
}

pub fn cluster_and_select_with(
    profiles: &ScoreProfileMatrix,
    k: usize,
    options: ClusterOptions,
) -> Result<Vec<String>> {
    let n = profiles.exercise_ids.len();
    if k == 0 || k > n {
        return Err(Error::ClusterCount { k, n });
    }
    let dist = correlation_distance(profiles, options.correlation)?;
    let merges = ward_linkage(&dist);
    let clusters = cut(&merges, n, k);
    let mut reps: Vec<String> = clusters
        .iter()
        .map(|c| profiles.exercise_ids[representative(profiles, c)].clone())
        .collect();
    reps.sort();
    Ok(reps)
}

/// Member nearest the cluster mean profile; near-ties prefer common entries, then id order.
pub fn representative(profiles: &ScoreProfileMatrix, members: &[usize]) -> usize {
    let cols = profiles.character_ids.len();
    let mut centroid = vec![0.0; cols];
    for &i in members {
        for (c, v) in centroid.iter_mut().zip(&profiles.rows[i]) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= members.len() as f64);
    let dist = |i: usize| -> f64 {
        profiles.rows[i]
            .iter()
            .zip(&centroid)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let best = members
        .iter()
        .map(|&i| dist(i))
        .fold(f64::INFINITY, f64::min);
    let mut near: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&i| dist(i) - best <= NEAR_TIE)
        .collect();
    near.sort_by(|&a, &b| {
        profiles.common[b]
            .cmp(&profiles.common[a])
            .then_with(|| profiles.exercise_ids[a].cmp(&profiles.exercise_ids[b]))
    });
    near[0]
}
