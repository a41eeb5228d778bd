//! Controllability and ranking metrics.

use std::collections::HashSet;

use crate::model::{ItemId, MaskMode, MaskVector, RecommendationList};
use crate::{Error, Result};

/// Revoked positions over the number of real (non-padding) positions.
pub fn complexity(mask: &MaskVector, effective_length: usize) -> Result<f64> {
    if mask.mode() != MaskMode::Binary {
        return Err(Error::contract("complexity needs a binary mask"));
    }
    if effective_length == 0 {
        return Err(Error::contract("effective length must be at least 1"));
    }
    Ok(mask.count_ones() as f64 / effective_length as f64)
}

/// Jaccard overlap between the undesired items and the items that left
/// the list. `1.0` when both sets are empty.
pub fn control_accuracy(
    original: &RecommendationList,
    counterfactual: &RecommendationList,
    undesired: &[ItemId],
) -> Result<f64> {
    let undesired: HashSet<ItemId> = undesired.iter().copied().collect();
    if let Some(bad) = undesired.iter().find(|i| !original.contains(**i)) {
        return Err(Error::contract(format!("undesired item {bad} is not in the original list")));
    }
    let removed: HashSet<ItemId> = original.items().filter(|i| !counterfactual.contains(*i)).collect();
    let union = undesired.union(&removed).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(undesired.intersection(&removed).count() as f64 / union as f64)
}

/// Single-relevant-item NDCG: `1 / log2(rank + 2)` for a 0-based rank
/// below `k`, else 0.
pub fn ndcg_from_rank(rank: Option<usize>, k: usize) -> f64 {
    match rank {
        Some(r) if r < k => 1.0 / ((r + 2) as f64).log2(),
        _ => 0.0,
    }
}

pub fn ndcg_at_k(ranked: &[ItemId], held_out: ItemId, k: usize) -> f64 {
    ndcg_from_rank(ranked.iter().position(|&i| i == held_out), k)
}

pub fn hit_rate_at_k(ranked: &[ItemId], held_out: ItemId, k: usize) -> f64 {
    match ranked.iter().position(|&i| i == held_out) {
        Some(r) if r < k => 1.0,
        _ => 0.0,
    }
}

/// Mean of `values`, `0.0` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
