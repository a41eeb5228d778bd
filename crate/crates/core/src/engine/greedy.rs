use super::{ExplanationRecord, Method, RetroRequest, Search};
use crate::linalg::{axpy, dot};
use crate::model::ScorerParams;
use crate::Result;

pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

/// Greedy retrospective search.
///
/// Each iteration revokes the position that most lowers
/// `f(target) - γ1 · Σ f(q)` over the other items `q` of the original
/// list, then checks whether the target has left the top-K.
pub fn greedy_retrospective(params: &ScorerParams, req: &RetroRequest) -> Result<ExplanationRecord> {
    let search = Search::new(params, req)?;
    // Scores are linear in the representation, so the heuristic is a
    // single inner product with a fixed direction.
    let mut direction = params.embedding(req.target).to_vec();
    for q in search.others() {
        axpy(-req.hyper.gamma1, params.embedding(q), &mut direction);
    }
    Ok(search.run(Method::Search, move |s, remaining| {
        let reps = s.prepared.represent_flips(&s.mask, remaining);
        let h: Vec<f64> = reps.iter().map(|rep| dot(rep, &direction)).collect();
        let mut best = 0;
        for i in 1..h.len() {
            // Equal up to rounding counts as a tie, which the lower
            // position wins.
            if h[i] < h[best] - TIE_TOLERANCE * (1.0 + h[best].abs()) {
                best = i;
            }
        }
        remaining[best]
    }))
}
