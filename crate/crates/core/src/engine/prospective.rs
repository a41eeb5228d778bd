use super::{ExplanationKind, ExplanationRecord, Status};
use crate::model::{recommend_top_k, ItemId, MaskMode, MaskVector, RecommendationList, ScorerParams, SequenceWindow};
use crate::{Error, Result};

/// Lists before and after appending an interaction.
#[derive(Clone, Debug)]
pub struct ProspectivePreview {
    pub record: ExplanationRecord,
    pub before: RecommendationList,
    pub after: RecommendationList,
    pub window_after: SequenceWindow,
    pub mask_after: MaskVector,
}

/// Appends `item` to the window (dropping the oldest slot) and compares
/// the top-`k` lists. `mask` carries existing revocations and shifts
/// along with the window.
pub fn prospective_preview(
    params: &ScorerParams,
    window: &SequenceWindow,
    mask: &MaskVector,
    item: ItemId,
    k: usize,
    exclude_history: bool,
) -> Result<ProspectivePreview> {
    params.check_item(item)?;
    if mask.mode() != MaskMode::Binary {
        return Err(Error::contract("prospective explanations need a binary mask"));
    }
    let before = recommend_top_k(params, window, mask, k, exclude_history)?;
    let window_after = window.appended(item);
    let mask_after = mask.appended();
    let after = recommend_top_k(params, &window_after, &mask_after, k, exclude_history)?;
    let added_items: Vec<ItemId> = after.items().filter(|&i| !before.contains(i)).collect();
    let record = ExplanationRecord {
        kind: ExplanationKind::Prospective,
        method: None,
        target: Some(item),
        target_rank: None,
        revoked: Vec::new(),
        added_items,
        status: Status::Success,
        iterations: 1,
        final_mask: mask_after.clone(),
        flagged: None,
        diagnostic: None,
    };
    Ok(ProspectivePreview {
        record,
        before,
        after,
        window_after,
        mask_after,
    })
}

/// Items that enter the top-`k` list because of the new interaction.
pub fn prospective_explanation(
    params: &ScorerParams,
    window: &SequenceWindow,
    mask: &MaskVector,
    item: ItemId,
    k: usize,
    exclude_history: bool,
) -> Result<ExplanationRecord> {
    prospective_preview(params, window, mask, item, k, exclude_history).map(|p| p.record)
}
