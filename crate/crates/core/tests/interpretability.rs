mod common;

use common::{brute_force_is, counting_ranks, intrusion_question_ok};
use proptest::prelude::*;
use sparse_interp::eval_interpret::{
    build_heatmap, check_question, dominating_dimension, gamma_profile, generate_intrusion_questions,
    interpretability_score, top_words, Direction, IntrusionBands,
};
use sparse_interp::numcore::Matrix;
use sparse_interp::synthetic::{gaussian_embedding, PlantedGroups};
use sparse_interp::{CategoryDataset, EmbeddingMatrix, SeededRng};

fn instance(v: usize, d: usize, groups: usize, seed: u64, tied: bool) -> (EmbeddingMatrix, CategoryDataset, Vec<Vec<usize>>) {
    let mut rng = SeededRng::new(seed);
    let data = (0..v * d)
        .map(|_| if tied { rng.below(4) as f64 } else { rng.normal() })
        .collect();
    let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
    let emb = EmbeddingMatrix::new(words.clone(), Matrix::new(v, d, data).unwrap()).unwrap();
    let pool: Vec<usize> = (0..v).collect();
    let members: Vec<Vec<usize>> = (0..groups)
        .map(|_| {
            let n = 5 + rng.below(v / 2 - 4);
            rng.sample(&pool, n)
        })
        .collect();
    let dataset = CategoryDataset::new(
        members
            .iter()
            .enumerate()
            .map(|(j, m)| (format!("cat{j}"), m.iter().map(|&w| words[w].clone()).collect::<Vec<_>>())),
    );
    (emb, dataset, members)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn is_matches_brute_force(v in 12usize..60, d in 1usize..8, groups in 1usize..6, seed in any::<u64>(), tied in any::<bool>()) {
        let (emb, dataset, members) = instance(v, d, groups, seed, tied);
        let got = interpretability_score(&emb, &dataset, 1).unwrap();
        let (per_dim, mean) = brute_force_is(&emb, &members, 1);
        for (a, b) in got.per_dimension.iter().zip(&per_dim) {
            prop_assert!((a.score - b).abs() <= 1e-12);
        }
        prop_assert!((got.overall - mean).abs() <= 1e-12);
    }

    #[test]
    fn is_grows_with_gamma(v in 20usize..60, d in 1usize..6, seed in any::<u64>()) {
        let (emb, dataset, _) = instance(v, d, 3, seed, false);
        let profile = gamma_profile(&emb, &dataset, 4).unwrap();
        for w in profile.windows(2) {
            prop_assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn is_invariant_under_increasing_maps(v in 12usize..50, d in 1usize..6, seed in any::<u64>()) {
        let (emb, dataset, _) = instance(v, d, 3, seed, false);
        let shifted: Vec<f64> = emb.values().as_slice().iter().map(|x| 3.0 * x.exp() + 1.0).collect();
        let mapped = emb.with_values(Matrix::new(v, d, shifted).unwrap()).unwrap();
        let a = interpretability_score(&emb, &dataset, 1).unwrap();
        let b = interpretability_score(&mapped, &dataset, 1).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn generated_questions_pass_both_checkers(v in 40usize..120, d in 2usize..8, seed in any::<u64>()) {
        let emb = gaussian_embedding(v, d, &mut SeededRng::new(seed));
        let qs = generate_intrusion_questions(&emb, 20, &mut SeededRng::new(seed ^ 1)).unwrap();
        for q in &qs {
            prop_assert!(intrusion_question_ok(&emb, q));
            prop_assert!(check_question(&emb, q).is_ok());
        }
    }

    #[test]
    fn heatmap_order_follows_group_mean(d in 1usize..12, g in 1usize..4, seed in any::<u64>()) {
        let emb = gaussian_embedding(6, d, &mut SeededRng::new(seed));
        let words: Vec<String> = emb.words().to_vec();
        let map = build_heatmap("e", &emb, &words, g).unwrap();
        let means: Vec<f64> = (0..d).map(|k| (0..g).map(|w| emb.row(w)[k]).sum::<f64>() / g as f64).collect();
        // the dimension at column r has exactly r dimensions ahead of it
        let ranks = counting_ranks(&means, true);
        for (r, &dim) in map.permutation.iter().enumerate() {
            prop_assert_eq!(ranks[dim], r);
        }
        for (w, row) in map.values.iter().enumerate() {
            for (r, &dim) in map.permutation.iter().enumerate() {
                prop_assert_eq!(row[r], emb.row(w)[dim]);
            }
        }
    }
}

#[test]
fn planted_group_tops_its_dimension() {
    // one group pushed far up in dimension 0: IS_0 = 100
    let (emb, dataset) = PlantedGroups::default().generate(&mut SeededRng::new(4));
    let members = dataset.group("group3").unwrap();
    let mut values = emb.values().clone();
    for w in members {
        let i = emb.index_of(w).unwrap();
        values.set(i, 0, 50.0);
    }
    let lifted = emb.with_values(values).unwrap();
    let r = interpretability_score(&lifted, &dataset, 1).unwrap();
    assert_eq!(r.per_dimension[0].score, 100.0);
    assert_eq!(r.per_dimension[0].best_category, "group3");
    assert_eq!(r.per_dimension[0].sign, Direction::Positive);
    let mut top = top_words(&lifted, 0, 10, Direction::Positive).unwrap();
    top.sort();
    let mut expect = members.to_vec();
    expect.sort();
    assert_eq!(top, expect);
    let (dim, _) = dominating_dimension(&lifted, &members[0], 5).unwrap();
    assert_eq!(dim, 0);
}

#[test]
fn window_larger_than_vocabulary_is_rejected() {
    let (emb, dataset, _) = instance(12, 2, 1, 9, false);
    let n = dataset.groups().next().unwrap().1.len();
    assert!(interpretability_score(&emb, &dataset, 12 / n + 1).is_err());
}

#[test]
fn bands_and_small_vocabularies() {
    let b = IntrusionBands::for_vocabulary(100).unwrap();
    assert_eq!((b.top, b.high, b.bottom), (10, 20, 50));
    let b = IntrusionBands::for_vocabulary(31).unwrap();
    assert_eq!((b.top, b.high, b.bottom), (4, 7, 16));
    assert!(IntrusionBands::for_vocabulary(30).is_err());
    let one_dim = gaussian_embedding(50, 1, &mut SeededRng::new(1));
    assert!(generate_intrusion_questions(&one_dim, 1, &mut SeededRng::new(1)).is_err());
}

#[test]
fn tampered_question_is_caught() {
    let emb = gaussian_embedding(100, 6, &mut SeededRng::new(3));
    let mut q = generate_intrusion_questions(&emb, 1, &mut SeededRng::new(3)).unwrap().remove(0);
    q.home_dim = q.source_dim;
    assert!(check_question(&emb, &q).is_err());
    assert!(!intrusion_question_ok(&emb, &q));
}
