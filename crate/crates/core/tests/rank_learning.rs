use std::collections::{BTreeMap, BTreeSet};

use cef_core::domain::{
    joint_rep, score, CharacterRep, Environment, ExerciseRep, GoalFlags, Provenance, ScoringModel,
    JOINT_DIM,
};
use cef_core::rank::{
    auc, cosine, evaluate_cv, evaluate_cv_with, expand_pairs, label_from_model, pairwise_accuracy,
    random_label, to_scoring_model, train, FoldBy, LabelContext, PairSample, RankedLabel,
    TrainOptions,
};
use cef_core::seed;
use proptest::prelude::*;
use rand::Rng;

const W_STAR: [f64; JOINT_DIM] = [3.0, 3.0, 2.0, 2.0, 2.0, 1.0, 1.0];

fn random_character(rng: &mut impl Rng) -> CharacterRep {
    let mut goals = GoalFlags {
        cardio: rng.random(),
        muscle: rng.random(),
        flexibility: rng.random(),
    };
    if !goals.any() {
        goals.cardio = true;
    }
    CharacterRep {
        met_capacity: rng.random_range(1.0..16.0),
        goals,
        environment: if rng.random() {
            Environment::Indoor
        } else {
            Environment::Outdoor
        },
        social: if rng.random() {
            cef_core::domain::Social::Group
        } else {
            cef_core::domain::Social::Individual
        },
    }
}

fn random_exercise(rng: &mut impl Rng) -> ExerciseRep {
    ExerciseRep {
        met: rng.random_range(1.5..12.0),
        goals: GoalFlags {
            cardio: rng.random(),
            muscle: rng.random(),
            flexibility: rng.random(),
        },
        environment: if rng.random() {
            Environment::Indoor
        } else {
            Environment::Outdoor
        },
        social: if rng.random() {
            cef_core::domain::Social::Group
        } else {
            cef_core::domain::Social::Individual
        },
    }
}

/// Random (x, y1, y2) triples labelled by the sign of w*ᵀ(g1 − g2), with random orientation.
fn oracle_pairs(n: usize, w: &[f64; JOINT_DIM], seed_value: u64) -> Vec<PairSample> {
    let mut rng = seed::rng(seed_value);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = random_character(&mut rng);
        let (a, b) = (random_exercise(&mut rng), random_exercise(&mut rng));
        let (ga, gb) = (joint_rep(&x, &a).0, joint_rep(&x, &b).0);
        let mut u = [0.0; JOINT_DIM];
        for k in 0..JOINT_DIM {
            u[k] = ga[k] - gb[k];
        }
        let margin: f64 = w.iter().zip(&u).map(|(p, q)| p * q).sum();
        if margin.abs() < 1e-9 {
            continue;
        }
        let mut label: i8 = if margin > 0.0 { 1 } else { -1 };
        if rng.random::<bool>() {
            u.iter_mut().for_each(|v| *v = -*v);
            label = -label;
        }
        out.push(PairSample {
            features: u,
            label,
            better: "a".into(),
            worse: "b".into(),
            character_id: format!("c{}", out.len()),
        });
    }
    out
}

#[test]
fn weight_recovery_from_known_vector() {
    let samples = oracle_pairs(500, &W_STAR, 11);
    let clf = train(&samples, 1.0, 0).unwrap();
    let cos = cosine(&clf.weights, &W_STAR);
    assert!(cos >= 0.95, "cosine {cos}");
    assert!(pairwise_accuracy(&clf, &samples) >= 0.95);
    let held_out = oracle_pairs(2000, &W_STAR, 12);
    let acc = pairwise_accuracy(&clf, &held_out);
    assert!(acc >= 0.95, "held-out accuracy {acc}");
}

#[test]
fn separable_data_trains_to_full_accuracy() {
    // Margins bounded away from zero so the hard-margin separator is well inside C = 1.
    let samples: Vec<PairSample> = oracle_pairs(2000, &W_STAR, 5)
        .into_iter()
        .filter(|s| {
            let m: f64 = W_STAR.iter().zip(&s.features).map(|(a, b)| a * b).sum();
            m.abs() >= 1.0
        })
        .take(300)
        .collect();
    let clf = train(&samples, 1.0, 0).unwrap();
    assert_eq!(pairwise_accuracy(&clf, &samples), 1.0);
}

#[test]
fn symmetrized_data_has_zero_bias() {
    let base = oracle_pairs(200, &W_STAR, 3);
    let mut samples = base.clone();
    samples.extend(base.iter().map(|s| {
        let mut m = s.clone();
        m.features.iter_mut().for_each(|v| *v = -*v);
        m.label = -m.label;
        m
    }));
    let clf = train(&samples, 1.0, 9).unwrap();
    assert!(clf.bias.abs() <= 1e-3, "bias {}", clf.bias);
}

#[test]
fn checkpoints_never_increase() {
    let samples = oracle_pairs(300, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0], 8);
    let clf = train(&samples, 1.0, 0).unwrap();
    let cps = &clf.training_report.checkpoints;
    assert!(cps.len() > 10);
    for pair in cps.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-6);
    }
    assert!(
        (clf.training_report.final_objective - cps.last().unwrap()).abs() < 1e-6 * cps[0].max(1.0)
    );
}

#[test]
fn reseeded_orientation_keeps_direction() {
    let base = oracle_pairs(400, &W_STAR, 21);
    let flip = |s: &PairSample, seed_value: u64, i: usize| {
        let mut m = s.clone();
        if seed::derive(seed_value, i as u64) & 1 == 1 {
            m.features.iter_mut().for_each(|v| *v = -*v);
            m.label = -m.label;
        }
        m
    };
    let a: Vec<PairSample> = base
        .iter()
        .enumerate()
        .map(|(i, s)| flip(s, 1, i))
        .collect();
    let b: Vec<PairSample> = base
        .iter()
        .enumerate()
        .map(|(i, s)| flip(s, 2, i))
        .collect();
    let (ca, cb) = (train(&a, 1.0, 0).unwrap(), train(&b, 1.0, 0).unwrap());
    assert!(cosine(&ca.weights, &cb.weights) >= 0.99);
}

#[test]
fn minibatch_solver_is_seeded() {
    let samples = oracle_pairs(300, &W_STAR, 4);
    let opts = TrainOptions {
        solver: cef_core::rank::Solver::MiniBatch { batch: 32 },
        ..TrainOptions::default()
    };
    let a = cef_core::rank::train_with(&samples, 1.0, 7, &opts).unwrap();
    let b = cef_core::rank::train_with(&samples, 1.0, 7, &opts).unwrap();
    assert_eq!(a, b);
    assert!(cosine(&a.weights, &W_STAR) >= 0.9);
}

#[test]
fn accuracy_matches_score_oracle() {
    let mut rng = seed::rng(30);
    let pool: Vec<(String, ExerciseRep)> = (0..7)
        .map(|i| (format!("e{i}"), random_exercise(&mut rng)))
        .collect();
    let reps: BTreeMap<String, ExerciseRep> = pool.iter().cloned().collect();
    let mut samples = Vec::new();
    let mut contexts = BTreeMap::new();
    for c in 0..30 {
        let x = random_character(&mut rng);
        let id = format!("c{c}");
        let label = label_from_model(
            &id,
            None,
            &x,
            &pool,
            &ScoringModel::new(W_STAR, Provenance::Synthetic),
            1,
            1,
        )
        .unwrap();
        samples.extend(expand_pairs(&label, &reps, &x, c).unwrap());
        contexts.insert(id, x);
    }
    let clf = train(&samples, 1.0, 0).unwrap();
    let model = to_scoring_model(&clf, Provenance::Expert);
    assert_eq!(model.weights, clf.weights);
    let oracle_hits = samples
        .iter()
        .filter(|s| {
            let x = &contexts[&s.character_id];
            let diff = score(x, &reps[&s.better], &model) - score(x, &reps[&s.worse], &model);
            let decision = f64::from(s.label) * diff + clf.bias;
            (decision >= 0.0) == (s.label == 1)
        })
        .count();
    let direct = pairwise_accuracy(&clf, &samples);
    assert!((direct - oracle_hits as f64 / samples.len() as f64).abs() < 1e-12);
}

fn consistent_study(
    n_chars: usize,
    seed_value: u64,
    participants: usize,
) -> (Vec<RankedLabel>, LabelContext) {
    let mut rng = seed::rng(seed_value);
    let pool: Vec<(String, ExerciseRep)> = (0..7)
        .map(|i| (format!("e{i}"), random_exercise(&mut rng)))
        .collect();
    let model = ScoringModel::new(W_STAR, Provenance::Synthetic);
    let mut ctx = LabelContext {
        exercises: pool.iter().cloned().collect(),
        ..LabelContext::default()
    };
    let mut labels = Vec::new();
    for c in 0..n_chars {
        let x = random_character(&mut rng);
        let id = format!("c{c:02}");
        let participant = (participants > 0).then(|| format!("p{}", c % participants));
        labels.push(label_from_model(&id, participant, &x, &pool, &model, 1, 1).unwrap());
        ctx.characters.insert(id, x);
    }
    (labels, ctx)
}

#[test]
fn leave_one_character_out_on_consistent_labels() {
    let (labels, ctx) = consistent_study(60, 2, 0);
    let report = evaluate_cv(&labels, &ctx, FoldBy::Character, 1.0, 3).unwrap();
    assert_eq!(report.folds.len(), 60);
    assert!(report.mean_accuracy >= 0.99, "{report:?}");
    assert!(report.mean_auc.unwrap() >= 0.99);
}

#[test]
fn leave_one_participant_out_groups_labels() {
    let (labels, ctx) = consistent_study(20, 6, 4);
    let report = evaluate_cv(&labels, &ctx, FoldBy::Participant, 1.0, 3).unwrap();
    assert_eq!(report.folds.len(), 4);
    assert!(report.mean_accuracy >= 0.95);
}

#[test]
fn cv_needs_two_groups() {
    let (labels, ctx) = consistent_study(1, 2, 0);
    assert!(evaluate_cv(&labels, &ctx, FoldBy::Character, 1.0, 3).is_err());
}

#[test]
fn random_labels_give_chance_auc() {
    let opts = TrainOptions {
        iterations: 2_000,
        checkpoint_every: 100,
        ..TrainOptions::default()
    };
    let mut means = Vec::new();
    for s in 0..30u64 {
        let (_, ctx) = consistent_study(20, 100 + s, 0);
        let pool: Vec<String> = ctx.exercises.keys().cloned().collect();
        let mut rng = seed::rng(7_000 + s);
        let labels: Vec<RankedLabel> = ctx
            .characters
            .keys()
            .map(|id| random_label(id, &pool, 1, 1, &mut rng).unwrap())
            .collect();
        let report = evaluate_cv_with(&labels, &ctx, FoldBy::Character, 1.0, s, &opts).unwrap();
        means.push(report.mean_auc.unwrap());
    }
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    assert!((grand - 0.5).abs() <= 0.1, "mean auc over seeds {grand}");
}

#[test]
fn perfect_decisions_auc_one() {
    let scores = [-3.0, -1.0, -0.5, 0.2, 1.0, 4.0];
    let labels = [-1, -1, -1, 1, 1, 1];
    assert_eq!(auc(&scores, &labels), Some(1.0));
}

proptest! {
    #[test]
    fn pairs_never_within_a_ranked_set(n in 3usize..12, s1 in 1usize..4, s2 in 0usize..4, seed_value in any::<u64>()) {
        prop_assume!(s1 + s2 < n);
        let pool: Vec<String> = (0..n).map(|i| format!("e{i:02}")).collect();
        let set1: BTreeSet<String> = pool[..s1].iter().cloned().collect();
        let set2: BTreeSet<String> = pool[s1..s1 + s2].iter().cloned().collect();
        let label = RankedLabel::new("c", None, set1.clone(), set2.clone(), pool.clone()).unwrap();
        let mut rng = seed::rng(seed_value);
        let reps: BTreeMap<String, ExerciseRep> = pool.iter().map(|id| (id.clone(), random_exercise(&mut rng))).collect();
        let x = random_character(&mut rng);
        let pairs = expand_pairs(&label, &reps, &x, seed_value).unwrap();
        prop_assert_eq!(pairs.len(), s1 * (n - s1) + s2 * (n - s1 - s2));
        for p in &pairs {
            prop_assert!(!(set1.contains(&p.better) && set1.contains(&p.worse)));
            prop_assert!(!(set2.contains(&p.better) && set2.contains(&p.worse)));
            prop_assert!(set1.contains(&p.better) || set2.contains(&p.better));
        }
    }
}
