use super::{list_from_scores, ExplanationKind, ExplanationRecord, Method, RetroRequest, Search, Status};
use crate::linalg::axpy;
use crate::model::optim::Adam;
use crate::model::{ItemId, MaskMode, MaskVector};
use crate::model::{PreparedWindow, ScorerParams};
use crate::Result;

/// The relaxed objective over a continuous mask:
///
/// `L(Δ) = Σ_t Δ_t + λ · (max(0, α1 + f_target - f_K) + γ2 · R2)`
///
/// where `f_K` is the score of the item at the K-th place of the current
/// list with the target left out, and `R2 = -mean_q f_q` over the other
/// items of the original list (`+mean` when `r2_literal` is set).
/// Only free positions (occupied, not already revoked) contribute to the
/// sparsity term and receive gradient.
pub struct RelaxObjective<'a> {
    search: &'a Search<'a>,
    free: Vec<bool>,
    others: Vec<ItemId>,
}

/// Value and gradient of [`RelaxObjective`] at one point.
#[derive(Clone, Debug)]
pub struct RelaxEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub hinge: f64,
    /// The item the hinge compares against, if enough items are eligible.
    pub kth: Option<ItemId>,
}

impl<'a> RelaxObjective<'a> {
    pub(crate) fn new(search: &'a Search<'a>) -> Self {
        let mut free = vec![false; search.mask.len()];
        for &t in &search.candidates {
            free[t] = true;
        }
        RelaxObjective {
            search,
            free,
            others: search.others(),
        }
    }

    pub fn free_positions(&self) -> Vec<usize> {
        self.search.candidates.clone()
    }

    /// The item at the K-th place excluding the target under `delta`.
    pub fn kth_item(&self, scores: &[f64], delta: &[f64]) -> Option<ItemId> {
        let req = self.search.req;
        let mut scores = scores.to_vec();
        scores[req.target.idx()] = f64::NEG_INFINITY;
        let list = list_from_scores(self.search.params, &req.window, &scores, delta, req.k, req.exclude_history);
        // The target was pushed to the bottom, so it is only present when
        // fewer than K other items are eligible.
        list.entries
            .iter()
            .map(|&(i, _)| i)
            .filter(|&i| i != req.target)
            .nth(req.k - 1)
    }

    /// Loss and gradient with the K-th item re-identified at `delta`.
    pub fn evaluate(&self, delta: &[f64]) -> RelaxEval {
        self.evaluate_with(delta, None)
    }

    /// Loss and gradient; `kth` pins the comparison item when given.
    pub fn evaluate_with(&self, delta: &[f64], kth: Option<Option<ItemId>>) -> RelaxEval {
        let params = self.search.params;
        let req = self.search.req;
        let h = &req.hyper;
        let prepared: &PreparedWindow<'_> = &self.search.prepared;
        let mut loss = 0.0;
        let mut hinge = 0.0;
        let mut chosen = None;
        let (_, grad_mask) = prepared.represent_vjp_with(delta, |rep| {
            let scores = params.scores_for(rep);
            let kth = kth.unwrap_or_else(|| self.kth_item(&scores, delta));
            chosen = kth;
            let mut g = vec![0.0; rep.len()];
            if let Some(kth) = kth {
                hinge = h.alpha1 + scores[req.target.idx()] - scores[kth.idx()];
                // NaN propagates so the caller can detect overflow.
                if hinge > 0.0 || hinge.is_nan() {
                    loss += h.lambda * hinge;
                    axpy(h.lambda, params.embedding(req.target), &mut g);
                    axpy(-h.lambda, params.embedding(kth), &mut g);
                }
            }
            if !self.others.is_empty() {
                let sign = if h.r2_literal { 1.0 } else { -1.0 };
                let w = sign * h.lambda * h.gamma2 / self.others.len() as f64;
                for &q in &self.others {
                    loss += w * scores[q.idx()];
                    axpy(w, params.embedding(q), &mut g);
                }
            }
            g
        });
        let mut grad = vec![0.0; delta.len()];
        for (t, free) in self.free.iter().enumerate() {
            if *free {
                loss += delta[t].abs();
                grad[t] = grad_mask[t] + if delta[t] < 0.0 { -1.0 } else { 1.0 };
            }
        }
        RelaxEval {
            loss,
            grad,
            hinge,
            kth: chosen,
        }
    }
}

/// Continuous-relaxation retrospective solver.
///
/// Starts from the base mask, runs Adam on the free positions with
/// clipping to `[0, 1]`, binarises at the threshold and post-checks the
/// result by re-ranking. A failed post-check reports no revocations.
pub fn relaxed_retrospective(params: &ScorerParams, req: &RetroRequest) -> Result<ExplanationRecord> {
    let search = Search::new(params, req)?;
    let objective = RelaxObjective::new(&search);
    let hyper = &req.hyper;
    let mut delta = search.mask.clone();
    let mut adam = Adam::new(hyper.learning_rate, [(1, delta.len())]);
    let mut diagnostic = None;
    let mut steps = 0;
    if !search.candidates.is_empty() {
        for _ in 0..hyper.steps {
            let eval = objective.evaluate(&delta);
            if !eval.loss.is_finite() || eval.grad.iter().any(|g| !g.is_finite()) {
                diagnostic = Some(format!("non-finite loss after {steps} steps"));
                break;
            }
            adam.step_vec(&mut delta, &eval.grad);
            for &t in &search.candidates {
                delta[t] = delta[t].clamp(0.0, 1.0);
            }
            steps += 1;
        }
    }
    let binary: Vec<f64> = search
        .mask
        .iter()
        .enumerate()
        .map(|(t, &base)| {
            if base >= 0.5 || (objective.free[t] && delta[t] >= hyper.threshold) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let flagged: Vec<usize> = search
        .candidates
        .iter()
        .copied()
        .filter(|&t| binary[t] >= 0.5)
        .collect();
    let success = diagnostic.is_none() && !flagged.is_empty() && search.target_removed(&binary);
    if diagnostic.is_none() && flagged.is_empty() {
        diagnostic = Some("no position crossed the threshold".into());
    }
    Ok(ExplanationRecord {
        kind: ExplanationKind::Retrospective,
        method: Some(Method::Relax),
        target: Some(req.target),
        target_rank: search.target_rank(),
        revoked: if success { search.pairs(flagged.clone()) } else { Vec::new() },
        added_items: Vec::new(),
        status: if success { Status::Success } else { Status::Failure },
        iterations: steps,
        final_mask: MaskVector::from_values(binary, MaskMode::Binary)?,
        flagged: Some(flagged.len()),
        diagnostic,
    })
}

impl Search<'_> {
    /// The relaxed objective for this request, for inspection and tests.
    pub fn objective(&self) -> RelaxObjective<'_> {
        RelaxObjective::new(self)
    }
}
