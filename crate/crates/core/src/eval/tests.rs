use std::collections::HashSet;

use proptest::prelude::*;

use super::prospective::prediction_history;
use super::retro::evaluate_windows;
use super::*;
use crate::data::{split, InteractionLog};
use crate::engine::{Method, Status};
use crate::model::{Dims, ItemId, MaskVector, RecommendationList, ScorerKind, ScorerParams, SequenceWindow, UserId};
use crate::Matrix;

fn toy() -> ScorerParams {
    let emb = Matrix::from_vec(6, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.5, 0.5, 0.2, 0.4]);
    let dims = Dims {
        n_items: 6,
        dim: 2,
        window: 3,
    };
    ScorerParams::from_tensors(ScorerKind::Pooling, dims, vec![emb], true).unwrap()
}

#[test]
fn single_user_rows_match_hand_computation() {
    let params = toy();
    let window = SequenceWindow::from_history(&[ItemId(0), ItemId(1), ItemId(2)], 3);
    let config = RetroEvalConfig {
        methods: vec![Method::Search],
        k_values: vec![2],
        ..RetroEvalConfig::default()
    };
    let report = evaluate_windows(&params, &[(UserId(0), window)], &config).unwrap();
    // List [3, 4]. Target 3: revoke items 0 and 2. Target 4: revoke 1, then 2.
    assert_eq!(report.rows.len(), 2);
    let r = &report.rows[0];
    assert_eq!((r.target, r.target_rank, r.status), (ItemId(3), 0, Status::Success));
    assert_eq!(r.revoked, vec![ItemId(0), ItemId(2)]);
    assert_eq!(r.complexity, Some(2.0 / 3.0));
    assert_eq!(r.accuracy, Some(1.0));
    let r = &report.rows[1];
    assert_eq!((r.target, r.target_rank), (ItemId(4), 1));
    assert_eq!(r.revoked, vec![ItemId(1), ItemId(2)]);
    assert_eq!(r.accuracy, Some(1.0));
    let cell = report.cell(Method::Search, 2).unwrap();
    assert_eq!((cell.attempts, cell.successes, cell.fidelity), (2, 2, 1.0));
    assert!(report.table().contains("search"));
    assert_eq!(report.rows_csv().lines().count(), 3);
}

fn synthetic_dataset(users: usize, m: usize) -> crate::data::SplitDataset {
    let corpus = crate::data::synth::generate(&crate::data::synth::SynthConfig {
        n_users: users,
        n_items: 120,
        mean_extra: 10.0,
        ..Default::default()
    });
    split(&corpus.to_log(), m).unwrap()
}

fn trained_like(n_items: usize, kind: ScorerKind, window: usize) -> ScorerParams {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut p = ScorerParams::init(
        kind,
        Dims {
            n_items,
            dim: 8,
            window,
        },
        &mut rng,
    );
    p.mark_trained();
    p
}

#[test]
fn aggregates_equal_means_of_rows() {
    let data = synthetic_dataset(12, 2);
    let params = trained_like(data.n_items, ScorerKind::Gru, 10);
    let config = RetroEvalConfig {
        sample_size: 5,
        k_values: vec![2, 3],
        hyper: crate::engine::RetroHyperParams {
            steps: 40,
            ..Default::default()
        },
        ..RetroEvalConfig::default()
    };
    let report = retrospective_eval(&params, &data, &config).unwrap();
    assert_eq!(report.users.len(), 5);
    assert_eq!(report.rows.len(), 5 * (2 + 3) * 4);
    for cell in &report.summary {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.k == cell.k && r.method == cell.method).collect();
        let succ: Vec<_> = rows.iter().filter(|r| r.status == Status::Success).collect();
        assert_eq!(cell.attempts, rows.len());
        assert_eq!(cell.successes, succ.len());
        let mc = succ.iter().map(|r| r.complexity.unwrap()).sum::<f64>() / succ.len().max(1) as f64;
        assert!((cell.complexity - mc).abs() < 1e-12);
        assert!(rows.iter().all(|r| (r.status == Status::Success) == r.complexity.is_some()));
    }
    // Job count does not change results.
    let parallel = retrospective_eval(&params, &data, &RetroEvalConfig { jobs: 2, ..config.clone() }).unwrap();
    assert_eq!(parallel, report);
}

#[test]
fn untrained_params_and_oversized_samples_are_rejected() {
    let data = synthetic_dataset(4, 1);
    let mut params = trained_like(data.n_items, ScorerKind::Pooling, 5);
    let config = RetroEvalConfig {
        sample_size: 10,
        ..RetroEvalConfig::default()
    };
    assert!(matches!(retrospective_eval(&params, &data, &config), Err(crate::Error::Precondition(_))));
    params = ScorerParams::from_tensors(params.kind(), params.dims(), params.tensors().to_vec(), false).unwrap();
    assert!(matches!(retrospective_eval(&params, &data, &config), Err(crate::Error::Untrained)));
}

#[test]
fn target_cohort_is_recomputable_from_rows() {
    let data = synthetic_dataset(15, 4);
    let params = trained_like(data.n_items, ScorerKind::Gru, 12);
    let report = prospective_simulation(&params, &data, 5, 10, 1).unwrap();
    assert_eq!(report.rows.len(), data.users.len());
    for (row, user) in report.rows.iter().zip(&data.users) {
        let sim: HashSet<_> = user.simulation.iter().collect();
        assert_eq!(row.target, row.added.iter().all(|i| !sim.contains(i)));
        assert_eq!(row.current, Some(user.simulation[0]));
    }
    let targets = report.rows.iter().filter(|r| r.target).count();
    assert_eq!(report.target_keep.users, targets);
    assert_eq!(report.all_keep.users, report.rows.len());
    let keep: Vec<usize> = report.rows.iter().map(|r| r.keep_rank).collect();
    assert_eq!(report.all_keep, CohortMetrics::from_ranks(&keep, 10));
}

#[test]
fn zero_simulation_collapses_conditions() {
    let data = synthetic_dataset(8, 0);
    let params = trained_like(data.n_items, ScorerKind::Pooling, 10);
    let report = prospective_simulation(&params, &data, 5, 10, 1).unwrap();
    assert_eq!(report.target_keep.users, 0);
    assert_eq!(report.all_keep, report.all_revoke);
    assert_eq!(report.all_keep, evaluate_model(&params, &data, 10).unwrap());
}

#[test]
fn prediction_history_composition() {
    let raw: Vec<_> = (0..8).map(|i| ("u".to_string(), format!("{i}"), i as i64)).collect();
    let data = split(&InteractionLog::from_raw(&raw, "t"), 3).unwrap();
    let u = &data.users[0];
    let ids = |v: Vec<ItemId>| v.into_iter().map(|i| i.0).collect::<Vec<_>>();
    assert_eq!(ids(prediction_history(u, true)), vec![0, 1, 2, 3, 4, 5, 6]);
    assert_eq!(ids(prediction_history(u, false)), vec![0, 1, 2, 3, 5, 6]);
}

#[test]
fn popularity_uses_training_counts() {
    // Sequences [train, train, validation, test]; training counts are
    // 0 → 3 and 1, 3, 4 → 1. Test ranks: 2 (after 3 and 4), 2 (after 1
    // and 4), 0 (1 beats 3 on id).
    let seqs = [[0, 1, 5, 2], [0, 3, 6, 2], [0, 4, 7, 1]];
    let mut raw = Vec::new();
    for (u, seq) in seqs.iter().enumerate() {
        for (t, i) in seq.iter().enumerate() {
            raw.push((format!("{u}"), format!("{i}"), t as i64));
        }
    }
    let data = split(&InteractionLog::from_raw(&raw, "t"), 0).unwrap();
    let m = evaluate_popularity(&data, 10, 10);
    assert_eq!(m.users, 3);
    assert!((m.ndcg - 2.0 / 3.0).abs() < 1e-12);
    assert!((evaluate_popularity(&data, 10, 1).hit_rate - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn sweep_with_one_value_matches_a_single_evaluation() {
    let data = synthetic_dataset(6, 1);
    let params = trained_like(data.n_items, ScorerKind::Pooling, 8);
    let config = RetroEvalConfig {
        sample_size: 3,
        k_values: vec![3],
        ..RetroEvalConfig::default()
    };
    let sweep = ablation_sweep(&params, &data, SweepParam::Gamma1, &[1.0], &config).unwrap();
    let single = retrospective_eval(&params, &data, &RetroEvalConfig {
        methods: vec![Method::Search],
        ..config
    })
    .unwrap();
    assert_eq!(sweep.points[0].summary, single.summary);
    assert!(sweep.to_csv().starts_with("param,value"));
}

fn brute_jaccard(removed: &HashSet<u32>, undesired: &HashSet<u32>) -> f64 {
    let union = removed.union(undesired).count();
    if union == 0 {
        1.0
    } else {
        removed.intersection(undesired).count() as f64 / union as f64
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metrics_match_set_computations(
        original in prop::collection::hash_set(0u32..30, 1..10),
        after_raw in prop::collection::vec(0u32..30, 0..10),
        pick in prop::collection::vec(any::<bool>(), 10),
        mask_bits in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        let original: Vec<u32> = original.into_iter().collect();
        let list = |ids: &[u32]| RecommendationList {
            entries: ids.iter().map(|&i| (ItemId(i), 0.0)).collect(),
            k: ids.len(),
            truncated: false,
        };
        let mut after: Vec<u32> = Vec::new();
        for i in after_raw {
            if !after.contains(&i) {
                after.push(i);
            }
        }
        let undesired: Vec<u32> = original.iter().zip(&pick).filter(|(_, p)| **p).map(|(i, _)| *i).collect();
        let removed: HashSet<u32> = original.iter().copied().filter(|i| !after.contains(i)).collect();
        let und: HashSet<u32> = undesired.iter().copied().collect();
        let und_ids: Vec<ItemId> = undesired.iter().map(|&i| ItemId(i)).collect();
        let acc = control_accuracy(&list(&original), &list(&after), &und_ids).unwrap();
        prop_assert_eq!(acc, brute_jaccard(&removed, &und));

        let ones = mask_bits.iter().filter(|b| **b).count();
        let mask = MaskVector::from_positions(mask_bits.len(), (0..mask_bits.len()).filter(|&t| mask_bits[t]));
        let c = complexity(&mask, mask_bits.len()).unwrap();
        prop_assert_eq!(c, ones as f64 / mask_bits.len() as f64);
    }
}
