//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucrec_core::engine::RetroRequest;
use ucrec_core::model::Dims;
use ucrec_core::{recommend_top_k, ItemId, MaskVector, ScorerKind, ScorerParams, SequenceWindow};

/// Random parameters and a full window of random history.
pub fn fixture(kind: ScorerKind, n_items: usize, dim: usize, window: usize, seed: u64) -> (ScorerParams, SequenceWindow) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ScorerParams::init(kind, Dims { n_items, dim, window }, &mut rng);
    let history: Vec<ItemId> = (0..window).map(|_| ItemId(rng.random_range(0..n_items as u32))).collect();
    (params, SequenceWindow::from_history(&history, window))
}

/// A retrospective request for the top-ranked item.
pub fn request(params: &ScorerParams, window: &SequenceWindow, k: usize) -> RetroRequest {
    let list = recommend_top_k(params, window, &MaskVector::binary(window.capacity()), k, true).expect("valid window");
    RetroRequest::new(window.clone(), list.entries[0].0, k)
}
