//! Pairwise learning to rank: ranked labels become difference vectors of the
//! joint representation, and a linear soft-margin classifier over those
//! differences yields scoring weights.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{
    dot, joint_rep, CharacterRep, ExerciseRep, Provenance, ScoringModel, JOINT_DIM,
};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_ITERATIONS: usize = 50_000;
pub const MODEL_FORMAT_VERSION: u32 = 1;

const AUG: usize = JOINT_DIM + 1;

#[inline]
fn dot_aug(a: &[f64; AUG], b: &[f64; AUG]) -> f64 {
    let mut acc = 0.0;
    for k in 0..AUG {
        acc += a[k] * b[k];
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLabel {
    pub character_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
    pub s1: BTreeSet<String>,
    pub s2: BTreeSet<String>,
    pub candidate_pool: Vec<String>,
}

impl RankedLabel {
    pub fn new(
        character_id: impl Into<String>,
        participant_id: Option<String>,
        s1: BTreeSet<String>,
        s2: BTreeSet<String>,
        candidate_pool: Vec<String>,
    ) -> Result<Self> {
        let label = RankedLabel {
            character_id: character_id.into(),
            participant_id,
            s1,
            s2,
            candidate_pool,
        };
        label.validate()?;
        Ok(label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s1.is_empty() {
            return Err(Error::validation("s1", "best set must not be empty"));
        }
        if let Some(id) = self.s1.intersection(&self.s2).next() {
            return Err(Error::validation(
                "s2",
                format!("{id} is in both s1 and s2"),
            ));
        }
        let pool: BTreeSet<&str> = self.candidate_pool.iter().map(String::as_str).collect();
        if pool.len() != self.candidate_pool.len() {
            return Err(Error::validation("candidate_pool", "duplicate ids in pool"));
        }
        for id in self.s1.iter().chain(&self.s2) {
            if !pool.contains(id.as_str()) {
                return Err(Error::validation(
                    "candidate_pool",
                    format!("{id} is ranked but not in the pool"),
                ));
            }
        }
        Ok(())
    }

    /// Grouping key for leave-one-group-out evaluation.
    pub fn group(&self, fold_by: FoldBy) -> &str {
        match fold_by {
            FoldBy::Character => &self.character_id,
            FoldBy::Participant => self.participant_id.as_deref().unwrap_or(&self.character_id),
        }
    }

    /// Ordered (better, worse) pairs implied by the two ranked sets.
    pub fn preference_pairs(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for i in &self.s1 {
            for j in &self.candidate_pool {
                if !self.s1.contains(j) {
                    out.push((i.as_str(), j.as_str()));
                }
            }
        }
        for i in &self.s2 {
            for j in &self.candidate_pool {
                if !self.s1.contains(j) && !self.s2.contains(j) {
                    out.push((i.as_str(), j.as_str()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub features: [f64; JOINT_DIM],
    pub label: i8,
    pub better: String,
    pub worse: String,
    pub character_id: String,
}

impl PairSample {
    fn y(&self) -> f64 {
        f64::from(self.label)
    }
}

/// Expand a label into oriented pair samples. Each pair gets +1 with
/// `g(better) − g(worse)` or −1 with the negated difference, chosen by the seed.
pub fn expand_pairs(
    label: &RankedLabel,
    reps: &BTreeMap<String, ExerciseRep>,
    x: &CharacterRep,
    rng_seed: u64,
) -> Result<Vec<PairSample>> {
    label.validate()?;
    for id in &label.candidate_pool {
        if !reps.contains_key(id) {
            return Err(Error::UnknownExercise(id.clone()));
        }
    }
    let mut rng = seed::rng(rng_seed);
    let joint: BTreeMap<&str, [f64; JOINT_DIM]> = label
        .candidate_pool
        .iter()
        .map(|id| (id.as_str(), joint_rep(x, &reps[id]).0))
        .collect();
    Ok(label
        .preference_pairs()
        .into_iter()
        .map(|(better, worse)| {
            let (gb, gw) = (joint[better], joint[worse]);
            let positive: bool = rng.random();
            let sign = if positive { 1.0 } else { -1.0 };
            let mut features = [0.0; JOINT_DIM];
            for k in 0..JOINT_DIM {
                features[k] = sign * (gb[k] - gw[k]);
            }
            PairSample {
                features,
                label: if positive { 1 } else { -1 },
                better: better.to_string(),
                worse: worse.to_string(),
                character_id: label.character_id.clone(),
            }
        })
        .collect())
}

/// Characters and exercises needed to turn labels into features.
#[derive(Debug, Clone, Default)]
pub struct LabelContext {
    pub characters: BTreeMap<String, CharacterRep>,
    pub exercises: BTreeMap<String, ExerciseRep>,
}

impl LabelContext {
    /// Expand every label, seeding label `i` with stream `i` of `rng_seed`.
    pub fn expand_all(
        &self,
        labels: &[RankedLabel],
        rng_seed: u64,
    ) -> Result<Vec<Vec<PairSample>>> {
        labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let x = self
                    .characters
                    .get(&label.character_id)
                    .ok_or_else(|| Error::UnknownCharacter(label.character_id.clone()))?;
                expand_pairs(label, &self.exercises, x, seed::derive(rng_seed, i as u64))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Solver {
    /// Exact subgradient over every sample each iteration. Ignores the seed.
    FullBatch,
    /// Seeded sampling of `batch` samples per iteration, gradient rescaled to the full sum.
    MiniBatch { batch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub iterations: usize,
    pub checkpoint_every: usize,
    pub solver: Solver,
    /// Divide each feature by its root mean square before training; weights are mapped back.
    pub standardize: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            iterations: DEFAULT_ITERATIONS,
            checkpoint_every: 500,
            solver: Solver::FullBatch,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub iterations: usize,
    pub final_objective: f64,
    /// Best objective seen at each checkpoint; non-increasing.
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub weights: [f64; JOINT_DIM],
    pub bias: f64,
    pub c_param: f64,
    pub training_report: TrainingReport,
}

impl TrainedClassifier {
    pub fn decision(&self, u: &[f64; JOINT_DIM]) -> f64 {
        dot(&self.weights, u) + self.bias
    }

    pub fn predict(&self, u: &[f64; JOINT_DIM]) -> i8 {
        if self.decision(u) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// ½‖w‖² + C Σ max(0, 1 − yᵢ(wᵀuᵢ + b)).
pub fn objective(w: &[f64; JOINT_DIM], b: f64, samples: &[PairSample], c: f64) -> f64 {
    let reg = 0.5 * dot(w, w);
    let hinge: f64 = samples
        .iter()
        .map(|s| (1.0 - s.y() * (dot(w, &s.features) + b)).max(0.0))
        .sum();
    reg + c * hinge
}

pub fn train(samples: &[PairSample], c: f64, rng_seed: u64) -> Result<TrainedClassifier> {
    train_with(samples, c, rng_seed, &TrainOptions::default())
}

/// Subgradient descent with step 1/t (the regulariser is 1-strongly convex),
/// averaging over the second half of the run, and best-so-far checkpoints.
pub fn train_with(
    samples: &[PairSample],
    c: f64,
    rng_seed: u64,
    opts: &TrainOptions,
) -> Result<TrainedClassifier> {
    if samples.len() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "{} samples, need at least 2",
            samples.len()
        )));
    }
    let pos = samples.iter().filter(|s| s.label == 1).count();
    if pos == 0 || pos == samples.len() {
        return Err(Error::DegenerateTraining(
            "only one label class present".into(),
        ));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::validation(
            "c",
            format!("must be positive and finite, got {c}"),
        ));
    }
    if opts.iterations == 0 {
        return Err(Error::validation("iterations", "must be at least 1"));
    }
    if let Solver::MiniBatch { batch } = opts.solver {
        if batch == 0 {
            return Err(Error::validation("batch", "must be at least 1"));
        }
    }

    let scale = if opts.standardize {
        feature_scale(samples)
    } else {
        [1.0; JOINT_DIM]
    };
    // Each row is y·[u, 1], so the margin of θ = [w, b] is a single dot product.
    let rows: Vec<[f64; AUG]> = samples
        .iter()
        .map(|s| {
            let y = s.y();
            let mut z = [y; AUG];
            for k in 0..JOINT_DIM {
                z[k] = y * s.features[k] / scale[k];
            }
            z
        })
        .collect();
    let n = rows.len();
    let obj = |theta: &[f64; AUG]| -> f64 {
        let hinge: f64 = rows
            .iter()
            .map(|z| (1.0 - dot_aug(theta, z)).max(0.0))
            .sum();
        0.5 * theta[..JOINT_DIM].iter().map(|v| v * v).sum::<f64>() + c * hinge
    };

    let mut rng = seed::rng(rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut theta = [0.0; AUG];
    let mut sum = [0.0; AUG];
    let mut averaged = 0usize;
    let avg_start = opts.iterations / 2;

    let mut best = (theta, obj(&theta));
    let mut checkpoints = vec![best.1];
    let every = opts.checkpoint_every.max(1);

    for t in 1..=opts.iterations {
        let mut grad = [0.0; AUG];
        match opts.solver {
            Solver::FullBatch => {
                for z in &rows {
                    if dot_aug(&theta, z) < 1.0 {
                        for k in 0..AUG {
                            grad[k] -= z[k];
                        }
                    }
                }
                grad.iter_mut().for_each(|g| *g *= c);
            }
            Solver::MiniBatch { batch } => {
                let k = batch.min(n);
                let (chosen, _) = order.partial_shuffle(&mut rng, k);
                for &i in chosen.iter() {
                    let z = &rows[i];
                    if dot_aug(&theta, z) < 1.0 {
                        for k in 0..AUG {
                            grad[k] -= z[k];
                        }
                    }
                }
                let factor = c * n as f64 / k as f64;
                grad.iter_mut().for_each(|g| *g *= factor);
            }
        }
        let eta = 1.0 / t as f64;
        for k in 0..JOINT_DIM {
            theta[k] -= eta * (theta[k] + grad[k]);
        }
        theta[JOINT_DIM] -= eta * grad[JOINT_DIM];

        if t > avg_start {
            for k in 0..AUG {
                sum[k] += theta[k];
            }
            averaged += 1;
        }
        if t % every == 0 || t == opts.iterations {
            let o = obj(&theta);
            if o < best.1 {
                best = (theta, o);
            }
            if averaged > 0 {
                let mut avg = sum;
                avg.iter_mut().for_each(|v| *v /= averaged as f64);
                let o = obj(&avg);
                if o < best.1 {
                    best = (avg, o);
                }
            }
            checkpoints.push(best.1);
        }
    }

    let mut weights = [0.0; JOINT_DIM];
    for k in 0..JOINT_DIM {
        weights[k] = best.0[k] / scale[k];
    }
    let bias = best.0[JOINT_DIM];
    if weights.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
        return Err(Error::DegenerateTraining("solver diverged".into()));
    }
    let final_objective = objective(&weights, bias, samples, c);
    Ok(TrainedClassifier {
        weights,
        bias,
        c_param: c,
        training_report: TrainingReport {
            iterations: opts.iterations,
            final_objective,
            checkpoints,
        },
    })
}

fn feature_scale(samples: &[PairSample]) -> [f64; JOINT_DIM] {
    let mut out = [0.0; JOINT_DIM];
    for s in samples {
        for k in 0..JOINT_DIM {
            out[k] += s.features[k] * s.features[k];
        }
    }
    for v in out.iter_mut() {
        let rms = (*v / samples.len() as f64).sqrt();
        *v = if rms > 0.0 { rms } else { 1.0 };
    }
    out
}

pub fn pairwise_accuracy(clf: &TrainedClassifier, samples: &[PairSample]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let hits = samples
        .iter()
        .filter(|s| clf.predict(&s.features) == s.label)
        .count();
    hits as f64 / samples.len() as f64
}

/// Area under the ROC curve via the rank-sum statistic; tied scores count ½.
/// `None` when either class is absent.
pub fn auc(scores: &[f64], labels: &[i8]) -> Option<f64> {
    assert_eq!(
        scores.len(),
        labels.len(),
        "scores and labels differ in length"
    );
    let n_pos = labels.iter().filter(|&&l| l > 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block [i, j]
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] > 0 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldBy {
    Character,
    Participant,
}

impl std::str::FromStr for FoldBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "character" => Ok(FoldBy::Character),
            "participant" => Ok(FoldBy::Participant),
            other => Err(Error::validation(
                "fold_by",
                format!("expected character or participant, got {other}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub group: String,
    pub test_pairs: usize,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    /// Mean over folds whose held-out pairs contain both classes.
    pub mean_auc: Option<f64>,
    pub folds: Vec<FoldResult>,
}

pub fn evaluate_cv(
    labels: &[RankedLabel],
    ctx: &LabelContext,
    fold_by: FoldBy,
    c: f64,
    rng_seed: u64,
) -> Result<CvReport> {
    evaluate_cv_with(labels, ctx, fold_by, c, rng_seed, &TrainOptions::default())
}

/// Leave-one-group-out. Pair orientation is drawn once per label, so every
/// fold sees the same samples.
pub fn evaluate_cv_with(
    labels: &[RankedLabel],
    ctx: &LabelContext,
    fold_by: FoldBy,
    c: f64,
    rng_seed: u64,
    opts: &TrainOptions,
) -> Result<CvReport> {
    let groups: BTreeSet<&str> = labels.iter().map(|l| l.group(fold_by)).collect();
    if groups.len() < 2 {
        return Err(Error::TooFewGroups(groups.len()));
    }
    let expanded = ctx.expand_all(labels, rng_seed)?;
    let mut folds = Vec::with_capacity(groups.len());
    for (fold_idx, group) in groups.iter().enumerate() {
        let mut train_set = Vec::new();
        let mut test_set = Vec::new();
        for (label, pairs) in labels.iter().zip(&expanded) {
            if label.group(fold_by) == *group {
                test_set.extend(pairs.iter().cloned());
            } else {
                train_set.extend(pairs.iter().cloned());
            }
        }
        if test_set.is_empty() {
            continue;
        }
        let clf = train_with(
            &train_set,
            c,
            seed::derive(rng_seed ^ 0x5EED, fold_idx as u64),
            opts,
        )?;
        let scores: Vec<f64> = test_set.iter().map(|s| clf.decision(&s.features)).collect();
        let ys: Vec<i8> = test_set.iter().map(|s| s.label).collect();
        folds.push(FoldResult {
            group: group.to_string(),
            test_pairs: test_set.len(),
            accuracy: pairwise_accuracy(&clf, &test_set),
            auc: auc(&scores, &ys),
        });
    }
    if folds.is_empty() {
        return Err(Error::DegenerateTraining(
            "no fold produced test pairs".into(),
        ));
    }
    let k = folds.len() as f64;
    let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / k;
    let std_accuracy = (folds
        .iter()
        .map(|f| (f.accuracy - mean_accuracy).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
    let mean_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(CvReport {
        mean_accuracy,
        std_accuracy,
        mean_auc,
        folds,
    })
}

pub fn to_scoring_model(clf: &TrainedClassifier, provenance: Provenance) -> ScoringModel {
    ScoringModel {
        weights: clf.weights,
        bias: clf.bias,
        provenance,
    }
}

pub fn cosine(a: &[f64; JOINT_DIM], b: &[f64; JOINT_DIM]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

/// Versioned on-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub provenance: Provenance,
    pub data_digest: String,
}

impl ModelFile {
    pub fn from_classifier(
        clf: &TrainedClassifier,
        provenance: Provenance,
        data_digest: impl Into<String>,
    ) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            weights: clf.weights.to_vec(),
            bias: clf.bias,
            c: clf.c_param,
            provenance,
            data_digest: data_digest.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::validation(
                "format_version",
                format!("unsupported model format {}", file.format_version),
            ));
        }
        if file.weights.len() != JOINT_DIM {
            return Err(Error::validation(
                "weights",
                format!("expected {JOINT_DIM} weights, got {}", file.weights.len()),
            ));
        }
        if file.weights.iter().any(|w| !w.is_finite()) || !file.bias.is_finite() {
            return Err(Error::validation("weights", "non-finite coefficient"));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn model(&self) -> ScoringModel {
        let mut weights = [0.0; JOINT_DIM];
        weights.copy_from_slice(&self.weights);
        ScoringModel {
            weights,
            bias: self.bias,
            provenance: self.provenance,
        }
    }

    pub fn bundled_expert() -> Self {
        Self::from_json(crate::data::EXPERT_MODEL_JSON).expect("bundled expert model is valid")
    }

    pub fn bundled_human() -> Self {
        Self::from_json(crate::data::HUMAN_MODEL_JSON).expect("bundled human model is valid")
    }
}

/// sha256 over the raw bytes of the training inputs, in order.
pub fn data_digest<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    character_id: String,
    rank: u8,
    exercise_id: String,
    #[serde(default)]
    participant_id: Option<String>,
}

/// Parse ranked-label CSV (`character_id,rank,exercise_id[,participant_id]`).
/// Rows sharing (participant, character) form one label over `pool`.
pub fn parse_ranked_labels(reader: impl Read, pool: &[String]) -> Result<Vec<RankedLabel>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut grouped: BTreeMap<(Option<String>, String), (BTreeSet<String>, BTreeSet<String>)> =
        BTreeMap::new();
    for (i, row) in rdr.deserialize::<LabelRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            row: line,
            reason: e.to_string(),
        })?;
        let participant = row.participant_id.filter(|p| !p.is_empty());
        let entry = grouped.entry((participant, row.character_id)).or_default();
        match row.rank {
            1 => entry.0.insert(row.exercise_id),
            2 => entry.1.insert(row.exercise_id),
            r => {
                return Err(Error::Parse {
                    row: line,
                    reason: format!("rank must be 1 or 2, got {r}"),
                })
            }
        };
    }
    grouped
        .into_iter()
        .map(|((participant, character), (s1, s2))| {
            RankedLabel::new(character, participant, s1, s2, pool.to_vec())
        })
        .collect()
}

pub fn load_ranked_labels(path: impl AsRef<Path>, pool: &[String]) -> Result<Vec<RankedLabel>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ranked_labels(file, pool)
}

pub fn write_ranked_labels(labels: &[RankedLabel], mut out: impl std::io::Write) -> Result<()> {
    let has_participant = labels.iter().any(|l| l.participant_id.is_some());
    let mut wtr = csv::Writer::from_writer(&mut out);
    if has_participant {
        wtr.write_record(["character_id", "rank", "exercise_id", "participant_id"])?;
    } else {
        wtr.write_record(["character_id", "rank", "exercise_id"])?;
    }
    for l in labels {
        for (rank, set) in [("1", &l.s1), ("2", &l.s2)] {
            for id in set {
                let mut rec = vec![l.character_id.as_str(), rank, id.as_str()];
                if has_participant {
                    rec.push(l.participant_id.as_deref().unwrap_or(""));
                }
                wtr.write_record(&rec)?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<labels>", e))?;
    Ok(())
}

/// Label a character by a known model: the top `s1_size` scores form s1 and
/// the next `s2_size` form s2.
pub fn label_from_model(
    character_id: &str,
    participant_id: Option<String>,
    x: &CharacterRep,
    pool: &[(String, ExerciseRep)],
    model: &ScoringModel,
    s1_size: usize,
    s2_size: usize,
) -> Result<RankedLabel> {
    let ranked = crate::domain::rank_exercises(x, pool, model)?;
    if s1_size == 0 || s1_size + s2_size >= ranked.len() {
        return Err(Error::validation(
            "s1_size",
            "ranked sets must be non-empty and leave unranked items",
        ));
    }
    let s1 = ranked[..s1_size].iter().map(|(id, _)| id.clone()).collect();
    let s2 = ranked[s1_size..s1_size + s2_size]
        .iter()
        .map(|(id, _)| id.clone())
        .collect();
    RankedLabel::new(
        character_id,
        participant_id,
        s1,
        s2,
        pool.iter().map(|(id, _)| id.clone()).collect(),
    )
}

/// Uniformly random ranked sets, for null-model checks.
pub fn random_label(
    character_id: &str,
    pool: &[String],
    s1_size: usize,
    s2_size: usize,
    rng: &mut impl Rng,
) -> Result<RankedLabel> {
    let mut ids = pool.to_vec();
    ids.shuffle(rng);
    let s1 = ids.iter().take(s1_size).cloned().collect();
    let s2 = ids.iter().skip(s1_size).take(s2_size).cloned().collect();
    RankedLabel::new(character_id, None, s1, s2, pool.to_vec())
}
