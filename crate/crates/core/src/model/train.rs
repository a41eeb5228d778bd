//! Next-item training with one sampled negative per positive step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::Adam;
use super::{excluded_items, Dims, ItemId, ScorerKind, ScorerParams, SequenceWindow, UserId, ITEM_EMB};
use crate::autodiff::{Tape, Var};
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 50,
            batch_size: 128,
            dropout: 0.2,
            learning_rate: 0.001,
            max_epochs: 200,
            patience: 5,
            seed: 42,
        }
    }
}

/// One user's training span plus the held-out validation item.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSequence {
    pub user: UserId,
    pub train: Vec<ItemId>,
    pub validation: Option<ItemId>,
    /// Interactions of the user after filtering (all spans).
    pub total_interactions: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub validation_ndcg: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_validation_ndcg: f64,
    pub skipped_users: usize,
    pub training_steps: usize,
}

pub(crate) struct Dropout<'r> {
    rate: f64,
    rng: &'r mut ChaCha8Rng,
}

impl<'r> Dropout<'r> {
    pub(crate) fn apply(&mut self, tape: &mut Tape<'_>, x: Var) -> Var {
        if self.rate <= 0.0 {
            return x;
        }
        let (rows, cols) = tape.value(x).shape();
        let keep = 1.0 - self.rate;
        let data = (0..rows * cols)
            .map(|_| if self.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        tape.mul_const(x, Matrix::from_vec(rows, cols, data))
    }
}

/// Input window and per-slot targets for one training span.
///
/// The input is every item but the last; slot `s` is trained to predict
/// the item that follows it, including the padding slot right before the
/// first item (which predicts the first item from an empty history).
pub(crate) fn training_example(train: &[ItemId], window: usize) -> (SequenceWindow, Vec<Option<ItemId>>) {
    let len = train.len();
    let input = &train[..len.saturating_sub(1)];
    let win = SequenceWindow::from_history(input, window);
    let targets = (0..window)
        .map(|s| {
            let idx = s as isize + len as isize - window as isize;
            (idx >= 0 && (idx as usize) < len).then(|| train[idx as usize])
        })
        .collect();
    (win, targets)
}

fn sample_negative(rng: &mut ChaCha8Rng, n_items: usize, positive: ItemId) -> ItemId {
    if n_items == 1 {
        return positive;
    }
    loop {
        let c = rng.random_range(0..n_items);
        if c != positive.idx() {
            return ItemId::from(c);
        }
    }
}

/// Loss of one sequence; gradients are added to `grads`. Returns
/// `(loss, positive targets)`.
fn sequence_loss(
    params: &ScorerParams,
    train: &[ItemId],
    rng: &mut ChaCha8Rng,
    dropout: f64,
    grads: &mut [Matrix],
) -> (f64, usize) {
    let (window, targets) = training_example(train, params.window());
    let n_targets = targets.iter().flatten().count();
    if n_targets == 0 {
        return (0.0, 0);
    }
    let positives: Vec<Option<usize>> = targets.iter().map(|t| t.map(|i| i.idx())).collect();
    let negatives: Vec<Option<usize>> = targets
        .iter()
        .map(|t| t.map(|p| sample_negative(rng, params.n_items(), p).idx()))
        .collect();
    let weights: Vec<f64> = targets.iter().map(|t| if t.is_some() { 1.0 } else { 0.0 }).collect();

    let mut tape = Tape::new(params.tensors());
    let reps = {
        let mut dp = Dropout { rate: dropout, rng };
        params.graph(&mut tape, &window, None, Some(&mut dp))
    };
    let pos_emb = tape.gather(ITEM_EMB, &positives);
    let neg_emb = tape.gather(ITEM_EMB, &negatives);
    let pos_logit = tape.row_dot(reps, pos_emb);
    let neg_logit = tape.row_dot(reps, neg_emb);
    let pos_loss = tape.bce_with_logits(pos_logit, &vec![1.0; weights.len()], &weights);
    let neg_loss = tape.bce_with_logits(neg_logit, &vec![0.0; weights.len()], &weights);
    let loss = tape.add(pos_loss, neg_loss);
    let value = tape.value(loss).data[0];
    tape.backward(loss, None, grads);
    (value, n_targets)
}

/// 0-based rank of `item` among eligible items (ties to the lower id).
pub(crate) fn rank_of(scores: &[f64], excluded: &[bool], item: ItemId) -> usize {
    let target = (item.idx(), scores[item.idx()]);
    scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded[*i] && *i != item.idx())
        .filter(|(i, s)| super::ranks_before((*i, **s), target))
        .count()
}

/// NDCG@k of the validation items, scored from the training span.
pub fn validation_ndcg(params: &ScorerParams, sequences: &[TrainingSequence], k: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for seq in sequences {
        let Some(val) = seq.validation else { continue };
        let window = SequenceWindow::from_history(&seq.train, params.window());
        let Ok(prepared) = params.prepare(&window) else { continue };
        let rep = prepared.represent(&vec![0.0; window.capacity()]);
        let scores = params.scores_for(&rep);
        let mut excluded = excluded_items(params.n_items(), &window, &vec![0.0; window.capacity()], true);
        excluded[val.idx()] = false;
        let rank = rank_of(&scores, &excluded, val);
        total += crate::eval::metrics::ndcg_from_rank(Some(rank), k);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Trains a scorer. Parameters are taken from the epoch with the best
/// validation NDCG@10; the run is deterministic for a fixed seed.
pub fn train(
    kind: ScorerKind,
    n_items: usize,
    sequences: &[TrainingSequence],
    config: &TrainConfig,
) -> Result<(ScorerParams, TrainReport)> {
    if sequences.is_empty() || n_items == 0 {
        return Err(Error::EmptyDataset("no training sequences".into()));
    }
    if config.batch_size == 0 || config.dim == 0 || config.window == 0 {
        return Err(Error::Config("batch_size, dim and window must be positive".into()));
    }
    let mut report = TrainReport::default();
    let usable: Vec<&TrainingSequence> = sequences
        .iter()
        .filter(|s| {
            let ok = s.total_interactions >= 3 && !s.train.is_empty();
            if !ok {
                log::warn!("skipping user {} with too few interactions", s.user);
            }
            ok
        })
        .collect();
    report.skipped_users = sequences.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::EmptyDataset("every user was skipped".into()));
    }
    for seq in &usable {
        if let Some(bad) = seq.train.iter().chain(seq.validation.iter()).find(|i| i.idx() >= n_items) {
            return Err(Error::InvalidItem(bad.idx()));
        }
    }
    report.training_steps = usable.iter().map(|s| s.train.len().min(config.window)).sum();

    let dims = Dims {
        n_items,
        dim: config.dim,
        window: config.window,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ScorerParams::init(kind, dims, &mut rng);
    let mut adam = Adam::new(config.learning_rate, params.tensors().iter().map(Matrix::shape));
    let mut grads: Vec<Matrix> = params.tensors().iter().map(|t| Matrix::zeros(t.rows, t.cols)).collect();
    let validation_set: Vec<TrainingSequence> = usable.iter().map(|s| (*s).clone()).collect();

    let mut best = params.clone();
    let mut best_ndcg = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..usable.len()).collect();

    for epoch in 1..=config.max_epochs {
        // Fisher-Yates with the training rng keeps epochs reproducible.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut epoch_targets = 0usize;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(Matrix::fill_zero);
            let mut batch_targets = 0usize;
            for &u in batch {
                let (loss, n) = sequence_loss(&params, &usable[u].train, &mut rng, config.dropout, &mut grads);
                epoch_loss += loss;
                batch_targets += n;
            }
            if batch_targets == 0 {
                continue;
            }
            epoch_targets += batch_targets;
            let scale = 1.0 / batch_targets as f64;
            for g in grads.iter_mut() {
                g.data.iter_mut().for_each(|v| *v *= scale);
            }
            adam.step(params.tensors_mut(), &grads);
        }
        let ndcg = validation_ndcg(&params, &validation_set, 10);
        let loss = epoch_loss / epoch_targets.max(1) as f64;
        log::info!("epoch {epoch}: loss {loss:.4} validation ndcg@10 {ndcg:.4}");
        report.epochs.push(EpochStats {
            epoch,
            loss,
            validation_ndcg: ndcg,
        });
        if !loss.is_finite() {
            return Err(Error::Precondition(format!("training diverged at epoch {epoch}")));
        }
        if ndcg > best_ndcg {
            best_ndcg = ndcg;
            best = params.clone();
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    best.mark_trained();
    report.best_validation_ndcg = best_ndcg;
    Ok((best, report))
}
