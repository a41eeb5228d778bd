//! Next-item ranking quality of a model and of a popularity baseline.

use super::metrics::{mean, ndcg_from_rank};
use super::CohortMetrics;
use crate::data::SplitDataset;
use crate::model::{excluded_items, train::rank_of, ItemId, ScorerParams, SequenceWindow};
use crate::{Error, Result};

/// NDCG@k and HitRate@k of each user's test item, predicted from
/// everything before it.
pub fn evaluate_model(params: &ScorerParams, data: &SplitDataset, k: usize) -> Result<CohortMetrics> {
    if !params.is_trained() {
        return Err(Error::Untrained);
    }
    let mut ranks = Vec::with_capacity(data.users.len());
    for u in &data.users {
        ranks.push(test_rank(params, &u.before_test(), u.test)?);
    }
    Ok(CohortMetrics::from_ranks(&ranks, k))
}

/// 0-based rank of `target` after `history`, skipping items in the window.
pub(crate) fn test_rank(params: &ScorerParams, history: &[ItemId], target: ItemId) -> Result<usize> {
    let window = SequenceWindow::from_history(history, params.window());
    let zero = vec![0.0; window.capacity()];
    let rep = params.prepare(&window)?.represent(&zero);
    let scores = params.scores_for(&rep);
    let mut excluded = excluded_items(params.n_items(), &window, &zero, true);
    excluded[target.idx()] = false;
    Ok(rank_of(&scores, &excluded, target))
}

/// Ranks by interaction count in the training spans.
pub fn evaluate_popularity(data: &SplitDataset, window: usize, k: usize) -> CohortMetrics {
    let mut counts = vec![0.0; data.n_items];
    for u in &data.users {
        for i in &u.train {
            counts[i.idx()] += 1.0;
        }
    }
    let ranks: Vec<usize> = data
        .users
        .iter()
        .map(|u| {
            let w = SequenceWindow::from_history(&u.before_test(), window);
            let mut excluded = excluded_items(data.n_items, &w, &vec![0.0; window], true);
            excluded[u.test.idx()] = false;
            rank_of(&counts, &excluded, u.test)
        })
        .collect();
    CohortMetrics::from_ranks(&ranks, k)
}

impl CohortMetrics {
    pub(crate) fn from_ranks(ranks: &[usize], k: usize) -> Self {
        let ndcg: Vec<f64> = ranks.iter().map(|&r| ndcg_from_rank(Some(r), k)).collect();
        let hit: Vec<f64> = ranks.iter().map(|&r| f64::from(u8::from(r < k))).collect();
        CohortMetrics {
            users: ranks.len(),
            ndcg: mean(&ndcg),
            hit_rate: mean(&hit),
        }
    }
}
