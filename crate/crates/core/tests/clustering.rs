use std::collections::BTreeSet;

use cef_core::catalog::{
    cluster_and_select, correlation_distance, cut, score_profiles, ward_linkage, Catalog,
    Correlation, ScoreProfileMatrix,
};
use cef_core::domain::{
    score, CharacterRep, Environment, GoalFlags, Provenance, ScoringModel, Social,
};
use cef_core::seed;
use proptest::prelude::*;
use rand::Rng;

/// Two blocks of three exercises; each block shares a base profile plus small noise.
pub fn two_block_profiles(seed_value: u64) -> ScoreProfileMatrix {
    let mut rng = seed::rng(seed_value);
    let cols = 8;
    let base_a: Vec<f64> = (0..cols).map(|j| (j as f64 * 0.9).sin() * 3.0).collect();
    let base_b: Vec<f64> = (0..cols)
        .map(|j| (j as f64 * 1.7 + 1.0).cos() * 3.0)
        .collect();
    let mut rows = Vec::new();
    for i in 0..6 {
        let base = if i < 3 { &base_a } else { &base_b };
        rows.push(
            base.iter()
                .map(|v| v + rng.random_range(-0.2..0.2))
                .collect(),
        );
    }
    ScoreProfileMatrix::new(
        (0..6).map(|i| format!("ex{i}")).collect(),
        vec![true; 6],
        (0..cols).map(|j| format!("c{j}")).collect(),
        rows,
    )
    .unwrap()
}

/// Best 2-partition by the Ward criterion, over every split of the items.
fn exhaustive_two_partition(dist: &[Vec<f64>]) -> (Vec<usize>, Vec<usize>) {
    let n = dist.len();
    let cost = |c: &[usize]| -> f64 {
        let mut s = 0.0;
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                s += dist[i][j].powi(2);
            }
        }
        s / c.len() as f64
    };
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    // item 0 always in the first part, so each split is visited once
    for mask in 0u32..(1 << (n - 1)) {
        let mut a = vec![0];
        let mut b = Vec::new();
        for i in 1..n {
            if mask & (1 << (i - 1)) != 0 {
                a.push(i);
            } else {
                b.push(i);
            }
        }
        if b.is_empty() {
            continue;
        }
        let c = cost(&a) + cost(&b);
        if best.as_ref().is_none_or(|(bc, _, _)| c < *bc) {
            best = Some((c, a, b));
        }
    }
    let (_, a, b) = best.unwrap();
    (a, b)
}

fn nearest_to_centroid(p: &ScoreProfileMatrix, members: &[usize]) -> String {
    let cols = p.rows[0].len();
    let centroid: Vec<f64> = (0..cols)
        .map(|j| members.iter().map(|&i| p.rows[i][j]).sum::<f64>() / members.len() as f64)
        .collect();
    let d = |i: usize| {
        p.rows[i]
            .iter()
            .zip(&centroid)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    let best = members
        .iter()
        .copied()
        .min_by(|&a, &b| d(a).total_cmp(&d(b)))
        .unwrap();
    p.exercise_ids[best].clone()
}

#[test]
fn two_blocks_match_exhaustive_partition() {
    for s in 0..20 {
        let p = two_block_profiles(s);
        let dist = correlation_distance(&p, Correlation::Pearson).unwrap();
        let (a, b) = exhaustive_two_partition(&dist);
        let ward: BTreeSet<Vec<usize>> = cut(&ward_linkage(&dist), 6, 2).into_iter().collect();
        let oracle: BTreeSet<Vec<usize>> = [a.clone(), b.clone()].into();
        assert_eq!(ward, oracle, "seed {s}");
        let mut expect = vec![nearest_to_centroid(&p, &a), nearest_to_centroid(&p, &b)];
        expect.sort();
        assert_eq!(cluster_and_select(&p, 2).unwrap(), expect, "seed {s}");
    }
}

#[test]
fn identical_rows_merge_first() {
    let mut p = two_block_profiles(1);
    p.rows[4] = p.rows[1].clone();
    let merges = ward_linkage(&correlation_distance(&p, Correlation::Pearson).unwrap());
    assert_eq!((merges[0].left, merges[0].right), (1, 4));
    assert!(merges[0].cost.abs() < 1e-12);
}

#[test]
fn k_equal_n_selects_everything() {
    let p = two_block_profiles(2);
    assert_eq!(cluster_and_select(&p, 6).unwrap(), p.exercise_ids);
    assert!(cluster_and_select(&p, 0).is_err());
    assert!(cluster_and_select(&p, 7).is_err());
}

fn random_character(rng: &mut impl Rng) -> CharacterRep {
    CharacterRep {
        met_capacity: rng.random_range(4.0..16.0),
        goals: GoalFlags {
            cardio: true,
            muscle: rng.random(),
            flexibility: rng.random(),
        },
        environment: if rng.random() {
            Environment::Indoor
        } else {
            Environment::Outdoor
        },
        social: if rng.random() {
            Social::Group
        } else {
            Social::Individual
        },
    }
}

#[test]
fn score_profiles_match_brute_force() {
    let catalog = Catalog::bundled();
    let five = catalog.subset(&catalog.ids()[..5]).unwrap();
    let mut rng = seed::rng(4);
    let chars: Vec<(String, CharacterRep)> = (0..10)
        .map(|j| (format!("c{j}"), random_character(&mut rng)))
        .collect();
    let model = ScoringModel::new([1.0, 0.5, 2.0, 1.5, 1.0, 0.7, 0.3], Provenance::Expert);
    let m = score_profiles(&five, &chars, &model).unwrap();
    assert_eq!((m.rows.len(), m.rows[0].len()), (5, 10));
    for (i, e) in five.entries().iter().enumerate() {
        for (j, (_, x)) in chars.iter().enumerate() {
            assert_eq!(m.rows[i][j], score(x, &e.rep, &model));
        }
    }
    let zero = score_profiles(
        &five,
        &chars,
        &ScoringModel::new([0.0; 7], Provenance::Expert),
    )
    .unwrap();
    assert!(zero.rows.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn bundled_catalog_contains_dropdown() {
    let dd = Catalog::bundled_dropdown();
    assert_eq!(
        dd.ids(),
        [
            "aerobics",
            "bicycling",
            "boxing",
            "jog/walk combination",
            "pilates",
            "resistance training",
            "swimming"
        ]
    );
    let full = Catalog::bundled();
    assert!(dd.ids().iter().all(|id| full.contains(id)));
}

fn random_profiles(n: usize, cols: usize, seed_value: u64) -> ScoreProfileMatrix {
    let mut rng = seed::rng(seed_value);
    ScoreProfileMatrix::new(
        (0..n).map(|i| format!("e{i:02}")).collect(),
        (0..n).map(|_| rng.random()).collect(),
        (0..cols).map(|j| format!("c{j}")).collect(),
        (0..n)
            .map(|_| (0..cols).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn ward_costs_are_monotone(n in 2usize..14, seed_value in any::<u64>()) {
        let p = random_profiles(n, 6, seed_value);
        let merges = ward_linkage(&correlation_distance(&p, Correlation::Pearson).unwrap());
        prop_assert_eq!(merges.len(), n - 1);
        for w in merges.windows(2) {
            prop_assert!(w[1].cost >= w[0].cost - 1e-12);
        }
    }

    #[test]
    fn clustering_is_permutation_invariant(n in 3usize..12, k in 1usize..4, seed_value in any::<u64>(), shuffle_seed in any::<u64>()) {
        prop_assume!(k <= n);
        let p = random_profiles(n, 6, seed_value);
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seed::rng(shuffle_seed));
        let q = ScoreProfileMatrix::new(
            order.iter().map(|&i| p.exercise_ids[i].clone()).collect(),
            order.iter().map(|&i| p.common[i]).collect(),
            p.character_ids.clone(),
            order.iter().map(|&i| p.rows[i].clone()).collect(),
        ).unwrap();
        let sets = |m: &ScoreProfileMatrix| -> BTreeSet<BTreeSet<String>> {
            let d = correlation_distance(m, Correlation::Pearson).unwrap();
            cut(&ward_linkage(&d), n, k)
                .into_iter()
                .map(|c| c.into_iter().map(|i| m.exercise_ids[i].clone()).collect())
                .collect()
        };
        prop_assert_eq!(sets(&p), sets(&q));
        let reps = cluster_and_select(&p, k).unwrap();
        prop_assert_eq!(reps.len(), k);
        prop_assert_eq!(reps.iter().collect::<BTreeSet<_>>().len(), k);
        prop_assert_eq!(reps, cluster_and_select(&q, k).unwrap());
    }
}
