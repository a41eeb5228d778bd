use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::Tape;

fn dims(n_items: usize, dim: usize, window: usize) -> Dims {
    Dims { n_items, dim, window }
}

/// Randomly initialised parameters with every tensor perturbed, so gains
/// and biases are not at their trivial initial values.
fn random_params(kind: ScorerKind, n_items: usize, dim: usize, window: usize, seed: u64) -> ScorerParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = ScorerParams::init(kind, dims(n_items, dim, window), &mut rng);
    let tensors = base
        .tensors()
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.data.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            t
        })
        .collect();
    ScorerParams::from_tensors(kind, base.dims(), tensors, true).unwrap()
}

fn items(ids: &[u32]) -> Vec<ItemId> {
    ids.iter().map(|&i| ItemId(i)).collect()
}

/// Last-row representation computed on the autodiff tape.
fn tape_rep(params: &ScorerParams, window: &SequenceWindow, mask: &[f64]) -> Vec<f64> {
    let mut tape = Tape::new(params.tensors());
    let m = tape.input(Matrix::from_vec(mask.len(), 1, mask.to_vec()));
    let out = params.graph(&mut tape, window, Some(m), None);
    tape.value(out).row(window.capacity() - 1).to_vec()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

const KINDS: [ScorerKind; 3] = [ScorerKind::Gru, ScorerKind::Attention, ScorerKind::Pooling];

#[test]
fn apply_mask_examples() {
    let emb = Matrix::from_vec(2, 2, vec![2.0, -4.0, 1.0, 1.0]);
    let params = ScorerParams::from_tensors(ScorerKind::Pooling, dims(2, 2, 3), vec![emb], true).unwrap();
    let window = SequenceWindow::from_history(&items(&[0, 1]), 3);

    let out = apply_mask(&params, &window, &MaskVector::binary(3)).unwrap();
    assert_eq!(out.data, vec![0.0, 0.0, 2.0, -4.0, 1.0, 1.0]);

    let out = apply_mask(&params, &window, &MaskVector::from_positions(3, [2])).unwrap();
    assert_eq!(out.row(2), &[0.0, 0.0]);

    let half = MaskVector::from_values(vec![0.0, 0.5, 0.0], MaskMode::Relaxed).unwrap();
    let out = apply_mask(&params, &window, &half).unwrap();
    assert_eq!(out.row(1), &[1.0, -2.0]);

    assert!(matches!(
        apply_mask(&params, &window, &MaskVector::binary(2)),
        Err(Error::Contract(_))
    ));
}

#[test]
fn gru_matches_hand_computed_value() {
    // d = 1; the expected value was worked out independently.
    let t = |v: f64| Matrix::from_vec(1, 1, vec![v]);
    let tensors = vec![
        Matrix::from_vec(3, 1, vec![0.5, -1.0, 2.0]),
        t(0.3),
        t(-0.2),
        t(0.8),
        t(0.1),
        t(0.4),
        t(-0.6),
        t(0.05),
        t(-0.1),
        t(0.2),
        t(0.3),
    ];
    let params = ScorerParams::from_tensors(ScorerKind::Gru, dims(3, 1, 2), tensors, true).unwrap();
    let window = SequenceWindow::from_history(&items(&[0, 1]), 2);
    let mask = MaskVector::from_values(vec![0.0, 0.5], MaskMode::Relaxed).unwrap();
    let s = score(&params, &window, &mask, ItemId(2)).unwrap();
    assert!((s - 0.13694851876943703).abs() < 1e-12, "{s}");
    let rep = tape_rep(&params, &window, mask.values());
    assert!((rep[0] - 0.06847425938471852).abs() < 1e-12);
}

#[test]
fn two_dimensional_gru_matches_hand_computed_value() {
    let m = |v: [f64; 4]| Matrix::from_vec(2, 2, v.to_vec());
    let b = |v: [f64; 2]| Matrix::row_vector(v.to_vec());
    let tensors = vec![
        Matrix::from_vec(3, 2, vec![0.5, -0.3, -1.0, 0.4, 2.0, 1.0]),
        m([0.3, -0.1, 0.2, 0.4]),
        m([-0.2, 0.5, 0.1, -0.3]),
        m([0.8, 0.0, -0.5, 0.6]),
        m([0.1, 0.2, -0.3, 0.1]),
        m([0.4, -0.2, 0.0, 0.3]),
        m([-0.6, 0.1, 0.2, 0.5]),
        b([0.05, -0.05]),
        b([-0.1, 0.1]),
        b([0.2, -0.1]),
        b([0.3, 0.0]),
    ];
    let params = ScorerParams::from_tensors(ScorerKind::Gru, dims(3, 2, 2), tensors, true).unwrap();
    let window = SequenceWindow::from_history(&items(&[0, 1]), 2);
    let mask = MaskVector::from_values(vec![0.0, 0.5], MaskMode::Relaxed).unwrap();
    let rep = params.prepare(&window).unwrap().represent(mask.values());
    assert!((rep[0] - 0.03958007478529135).abs() < 1e-12, "{rep:?}");
    assert!((rep[1] + 0.07969897828845529).abs() < 1e-12, "{rep:?}");
    let s = score(&params, &window, &mask, ItemId(2)).unwrap();
    assert!((s + 0.0005388287178725859).abs() < 1e-12, "{s}");
}

#[test]
fn pooling_score_and_gradient_are_analytic() {
    let emb = Matrix::from_vec(3, 2, vec![1.0, 0.0, 0.5, 2.0, -1.0, 3.0]);
    let params = ScorerParams::from_tensors(ScorerKind::Pooling, dims(3, 2, 3), vec![emb], true).unwrap();
    let window = SequenceWindow::from_history(&items(&[0, 1]), 3);
    let mask = MaskVector::from_values(vec![0.0, 0.25, 0.0], MaskMode::Relaxed).unwrap();
    // ⟨e_0, e_2⟩ = -1, ⟨e_1, e_2⟩ = 5.5
    let s = score(&params, &window, &mask, ItemId(2)).unwrap();
    assert!((s - (-0.75 + 5.5)).abs() < 1e-12);
    let (_, grads) = score_gradient(&params, &window, &mask, &[ItemId(2)]).unwrap();
    assert_eq!(grads[0], vec![0.0, 1.0, -5.5]);
}

#[test]
fn score_gradient_rejects_binary_masks() {
    let params = random_params(ScorerKind::Pooling, 5, 3, 4, 1);
    let window = SequenceWindow::from_history(&items(&[1, 2]), 4);
    assert!(matches!(
        score_gradient(&params, &window, &MaskVector::binary(4), &[ItemId(0)]),
        Err(Error::Contract(_))
    ));
}

#[test]
fn prepared_forward_matches_tape() {
    for kind in KINDS {
        let params = random_params(kind, 12, 6, 5, 7);
        let window = SequenceWindow::from_history(&items(&[3, 1, 7, 9]), 5);
        let mask = vec![0.0, 0.3, 0.0, 1.0, 0.6];
        let fast = params.prepare(&window).unwrap().represent(&mask);
        let slow = tape_rep(&params, &window, &mask);
        assert!(rel_err(&fast, &slow) < 1e-12, "{kind}: {fast:?} vs {slow:?}");
        assert_eq!(params.represent_on_tape(&window, &mask).unwrap(), slow);
    }
}

#[test]
fn single_flips_match_full_recomputation() {
    for kind in KINDS {
        let params = random_params(kind, 12, 6, 7, 3);
        let window = SequenceWindow::from_history(&items(&[3, 1, 7, 9, 2, 5]), 7);
        let prepared = params.prepare(&window).unwrap();
        let mask = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let positions = [1, 3, 4, 6];
        let flips = prepared.represent_flips(&mask, &positions);
        for (&t, rep) in positions.iter().zip(&flips) {
            let mut m = mask.clone();
            m[t] = 1.0;
            let full = prepared.represent(&m);
            assert!(rel_err(rep, &full) < 1e-12, "{kind} at {t}");
        }
    }
}

#[test]
fn mask_gradient_matches_tape_and_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in KINDS {
        for trial in 0..5 {
            let params = random_params(kind, 15, 5, 6, 100 + trial);
            let history: Vec<ItemId> = (0..5).map(|_| ItemId(rng.random_range(0..15))).collect();
            let window = SequenceWindow::from_history(&history, 6);
            let mask: Vec<f64> = (0..6).map(|_| rng.random_range(0.05..0.95)).collect();
            let g: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let prepared = params.prepare(&window).unwrap();
            let (_, grad) = prepared.represent_vjp(&mask, &g);

            // Route 1: reverse mode on the tape.
            let mut tape = Tape::new(params.tensors());
            let m = tape.input(Matrix::from_vec(6, 1, mask.clone()));
            let out = params.graph(&mut tape, &window, Some(m), None);
            let last = tape.row(out, 5);
            let gv = tape.input(Matrix::row_vector(g.clone()));
            let prod = tape.mul(last, gv);
            let y = tape.sum_all(prod);
            let grads = tape.backward(y, None, &mut []);
            let tape_grad = grads.get(m).unwrap().data.clone();
            assert!(rel_err(&grad, &tape_grad) < 1e-10, "{kind}: {grad:?} vs {tape_grad:?}");

            // Route 2: central differences.
            let h = 1e-5;
            let fd: Vec<f64> = (0..6)
                .map(|t| {
                    let mut p = mask.clone();
                    p[t] += h;
                    let up = dot(&prepared.represent(&p), &g);
                    p[t] -= 2.0 * h;
                    let down = dot(&prepared.represent(&p), &g);
                    (up - down) / (2.0 * h)
                })
                .collect();
            assert!(rel_err(&grad, &fd) < 1e-6, "{kind}: {grad:?} vs {fd:?}");
            // The leading slot is padding.
            assert_eq!(grad[0], 0.0);
        }
    }
}

#[test]
fn top_k_orders_by_score_then_id() {
    let list = top_k_from_scores(&[0.9, 0.1, 0.5], &[false; 3], 2);
    assert_eq!(list.items().collect::<Vec<_>>(), items(&[0, 2]));
    let list = top_k_from_scores(&[0.5, 0.9, 0.5, 0.5], &[false; 4], 3);
    assert_eq!(list.items().collect::<Vec<_>>(), items(&[1, 0, 2]));
    let list = top_k_from_scores(&[0.9, 0.1, 0.5], &[true, false, false], 2);
    assert_eq!(list.items().collect::<Vec<_>>(), items(&[2, 1]));
    let list = top_k_from_scores(&[0.9, 0.1], &[true, false], 3);
    assert!(list.truncated);
    assert_eq!(list.len(), 1);
}

#[test]
fn recommendation_excludes_unrevoked_history() {
    let params = random_params(ScorerKind::Gru, 10, 4, 4, 3);
    let window = SequenceWindow::from_history(&items(&[2, 5, 7]), 4);
    let list = recommend_top_k(&params, &window, &MaskVector::binary(4), 7, true).unwrap();
    assert_eq!(list.len(), 7);
    assert!(!list.contains(ItemId(2)) && !list.contains(ItemId(5)) && !list.contains(ItemId(7)));
    let list = recommend_top_k(&params, &window, &MaskVector::from_positions(4, [2]), 8, true).unwrap();
    assert!(list.contains(ItemId(5)));
    assert!(recommend_top_k(&params, &window, &MaskVector::binary(4), 0, true).is_err());
}

#[test]
fn invalid_inputs_are_rejected() {
    let params = random_params(ScorerKind::Pooling, 4, 2, 3, 0);
    let window = SequenceWindow::from_history(&items(&[1]), 3);
    assert!(matches!(
        score(&params, &window, &MaskVector::binary(3), ItemId(9)),
        Err(Error::InvalidItem(9))
    ));
    let wide = SequenceWindow::from_history(&items(&[1]), 4);
    assert!(score(&params, &wide, &MaskVector::binary(4), ItemId(0)).is_err());
    let bad = SequenceWindow::from_history(&items(&[8]), 3);
    assert!(score(&params, &bad, &MaskVector::binary(3), ItemId(0)).is_err());
}

#[test]
fn window_helpers() {
    let w = SequenceWindow::from_history(&items(&[1, 2, 3, 4]), 3);
    assert_eq!(w.slots(), &[Some(ItemId(2)), Some(ItemId(3)), Some(ItemId(4))]);
    let w = SequenceWindow::from_history(&items(&[1]), 3);
    assert_eq!(w.effective_length(), 1);
    assert_eq!(w.occupied_positions().collect::<Vec<_>>(), vec![2]);
    let a = w.appended(ItemId(5));
    assert_eq!(a.slots(), &[None, Some(ItemId(1)), Some(ItemId(5))]);
    let m = MaskVector::from_positions(3, [0, 2]).appended();
    assert_eq!(m.revoked_positions(), vec![1]);
}

#[test]
fn training_is_deterministic() {
    let seqs: Vec<TrainingSequence> = (0..6)
        .map(|u| TrainingSequence {
            user: UserId(u),
            train: items(&[u % 5, (u + 1) % 5, (u + 2) % 5, 5]),
            validation: Some(ItemId(6)),
            total_interactions: 6,
        })
        .collect();
    let config = TrainConfig {
        dim: 4,
        window: 5,
        batch_size: 4,
        max_epochs: 3,
        patience: 10,
        ..TrainConfig::default()
    };
    let (a, ra) = train(ScorerKind::Gru, 8, &seqs, &config).unwrap();
    let (b, rb) = train(ScorerKind::Gru, 8, &seqs, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert!(a.is_trained());
    // Four training items per user, every slot predicting within the span.
    assert_eq!(ra.training_steps, 6 * 4);
}

#[test]
fn minimal_user_has_one_training_step() {
    let (win, targets) = train::training_example(&items(&[4]), 5);
    assert_eq!(win.effective_length(), 0);
    assert_eq!(targets.iter().flatten().count(), 1);
    assert_eq!(targets[4], Some(ItemId(4)));
}

#[test]
fn training_learns_a_fixed_successor() {
    // a → b → c everywhere; after training, c should follow [a, b].
    let (a, b, c) = (ItemId(0), ItemId(1), ItemId(2));
    let seqs: Vec<TrainingSequence> = (0..40)
        .map(|u| TrainingSequence {
            user: UserId(u),
            train: vec![a, b, c],
            validation: Some(c),
            total_interactions: 5,
        })
        .collect();
    let config = TrainConfig {
        dim: 8,
        window: 4,
        batch_size: 8,
        dropout: 0.0,
        learning_rate: 0.01,
        max_epochs: 30,
        patience: 30,
        seed: 5,
    };
    let mut hits = 0;
    for seed in 0..10 {
        let config = TrainConfig { seed, ..config.clone() };
        let (params, _) = train(ScorerKind::Gru, 6, &seqs, &config).unwrap();
        let window = SequenceWindow::from_history(&[a, b], 4);
        let list = recommend_top_k(&params, &window, &MaskVector::binary(4), 1, true).unwrap();
        hits += usize::from(list.contains(c));
    }
    assert!(hits >= 9, "c ranked first in {hits}/10 runs");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Revoking positions is the same as replacing them with padding.
    #[test]
    fn revocation_equals_padding(
        kind_idx in 0usize..3,
        history in prop::collection::vec(0u32..20, 1..7),
        revoke in prop::collection::vec(any::<bool>(), 7),
        seed in 0u64..1000,
    ) {
        let kind = KINDS[kind_idx];
        let params = random_params(kind, 20, 4, 7, seed);
        let window = SequenceWindow::from_history(&items(&history), 7);
        let positions: Vec<usize> = (0..7).filter(|&t| revoke[t]).collect();
        let mask = MaskVector::from_positions(7, positions.iter().copied());
        let mut edited = window.clone();
        for &t in &positions {
            edited = edited.with_padding_at(t);
        }
        for item in [0u32, 5, 19] {
            let masked = score(&params, &window, &mask, ItemId(item)).unwrap();
            let physical = score(&params, &edited, &MaskVector::binary(7), ItemId(item)).unwrap();
            prop_assert!((masked - physical).abs() <= 1e-12 * (1.0 + masked.abs()));
        }
        let a = recommend_top_k(&params, &window, &mask, 5, true).unwrap();
        let b = recommend_top_k(&params, &edited, &MaskVector::binary(7), 5, true).unwrap();
        prop_assert_eq!(a.items().collect::<Vec<_>>(), b.items().collect::<Vec<_>>());
    }

    /// A zero mask leaves the embeddings untouched and a full mask zeroes them.
    #[test]
    fn mask_extremes(history in prop::collection::vec(0u32..10, 1..5), seed in 0u64..100) {
        let params = random_params(ScorerKind::Pooling, 10, 3, 5, seed);
        let window = SequenceWindow::from_history(&items(&history), 5);
        let zero = apply_mask(&params, &window, &MaskVector::binary(5)).unwrap();
        for (t, slot) in window.slots().iter().enumerate() {
            match slot {
                Some(i) => prop_assert_eq!(zero.row(t), params.embedding(*i)),
                None => prop_assert!(zero.row(t).iter().all(|v| *v == 0.0)),
            }
        }
        let full = apply_mask(&params, &window, &MaskVector::from_positions(5, 0..5)).unwrap();
        prop_assert!(full.data.iter().all(|v| *v == 0.0));
    }

    /// Lists are sorted, duplicate-free and avoid unrevoked history.
    #[test]
    fn lists_are_well_formed(
        kind_idx in 0usize..3,
        history in prop::collection::vec(0u32..15, 1..6),
        k in 1usize..10,
        seed in 0u64..1000,
    ) {
        let params = random_params(KINDS[kind_idx], 15, 3, 6, seed);
        let window = SequenceWindow::from_history(&items(&history), 6);
        let list = recommend_top_k(&params, &window, &MaskVector::binary(6), k, true).unwrap();
        prop_assert!(list.entries.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
        let mut seen = std::collections::HashSet::new();
        prop_assert!(list.items().all(|i| seen.insert(i)));
        prop_assert!(list.items().all(|i| !history.contains(&i.0)));
    }
}

/// Training loss as a function of the parameters, with fixed targets.
fn fixed_loss(params: &ScorerParams, window: &SequenceWindow, grads: &mut [Matrix]) -> f64 {
    let mut tape = Tape::new(params.tensors());
    let out = params.graph(&mut tape, window, None, None);
    let targets = tape.gather(ITEM_EMB, &[Some(1), None, Some(4), Some(2)]);
    let negatives = tape.gather(ITEM_EMB, &[Some(3), None, Some(0), Some(5)]);
    let pos = tape.row_dot(out, targets);
    let neg = tape.row_dot(out, negatives);
    let w = [1.0, 0.0, 1.0, 1.0];
    let lp = tape.bce_with_logits(pos, &[1.0; 4], &w);
    let ln = tape.bce_with_logits(neg, &[0.0; 4], &w);
    let loss = tape.add(lp, ln);
    let value = tape.value(loss).data[0];
    tape.backward(loss, None, grads);
    value
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for kind in KINDS {
        let params = random_params(kind, 6, 3, 4, 21);
        let window = SequenceWindow::from_history(&items(&[0, 3, 5]), 4);
        let mut grads: Vec<Matrix> = params.tensors().iter().map(|t| Matrix::zeros(t.rows, t.cols)).collect();
        fixed_loss(&params, &window, &mut grads);
        for (ti, tensor) in params.tensors().iter().enumerate() {
            for _ in 0..4 {
                let idx = rng.random_range(0..tensor.data.len());
                let h = 1e-5;
                let eval = |delta: f64| {
                    let mut tensors = params.tensors().to_vec();
                    tensors[ti].data[idx] += delta;
                    let p = ScorerParams::from_tensors(kind, params.dims(), tensors, true).unwrap();
                    fixed_loss(&p, &window, &mut [])
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads[ti].data[idx];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "{kind} tensor {ti} [{idx}]: analytic {an} vs numeric {fd}"
                );
            }
        }
    }
}
