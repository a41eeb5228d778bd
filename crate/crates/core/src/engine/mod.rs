//! Counterfactual explanations.
//!
//! A retrospective explanation is a set of window positions whose
//! revocation removes a target item from the top-K list. Two solvers are
//! provided: a greedy search that revokes one position at a time and a
//! continuous relaxation of the mask optimised with Adam. A prospective
//! explanation lists the items a newly appended interaction would bring
//! into the list.

mod greedy;
mod prospective;
mod relax;
mod render;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{
    excluded_items, recommend_prepared, top_k_from_scores, ItemId, MaskMode, MaskVector, PreparedWindow,
    RecommendationList, ScorerParams, SequenceWindow, UserId,
};
use crate::{Error, Result};

pub use greedy::greedy_retrospective;
pub use prospective::{prospective_explanation, prospective_preview, ProspectivePreview};
pub use relax::{relaxed_retrospective, RelaxEval, RelaxObjective};
pub use render::{join_names, render_explanation};

/// Tunable constants of the two retrospective solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetroHyperParams {
    /// Weight of the other list items in the greedy heuristic.
    pub gamma1: f64,
    /// Weight of the hinge and list-preservation terms against sparsity.
    pub lambda: f64,
    /// Weight of the list-preservation term in the relaxation.
    pub gamma2: f64,
    /// Hinge margin.
    pub alpha1: f64,
    pub learning_rate: f64,
    pub steps: usize,
    /// Binarisation threshold for the relaxed mask.
    pub threshold: f64,
    /// Keep the preservation term with a positive sign, which rewards
    /// lowering the other items' scores. Off by default.
    pub r2_literal: bool,
}

impl Default for RetroHyperParams {
    fn default() -> Self {
        RetroHyperParams {
            gamma1: 1.0,
            lambda: 10.0,
            gamma2: 1.0,
            alpha1: 0.1,
            learning_rate: 0.01,
            steps: 500,
            threshold: 0.5,
            r2_literal: false,
        }
    }
}

/// A request to explain why `target` is in the user's top-`k` list.
#[derive(Clone, Debug)]
pub struct RetroRequest {
    pub window: SequenceWindow,
    /// Positions already revoked before the explanation is sought. They
    /// stay revoked and are never part of the answer.
    pub base_mask: MaskVector,
    pub target: ItemId,
    pub k: usize,
    pub exclude_history: bool,
    pub hyper: RetroHyperParams,
}

impl RetroRequest {
    pub fn new(window: SequenceWindow, target: ItemId, k: usize) -> Self {
        let base_mask = MaskVector::binary(window.capacity());
        RetroRequest {
            window,
            base_mask,
            target,
            k,
            exclude_history: true,
            hyper: RetroHyperParams::default(),
        }
    }

    pub fn with_base_mask(mut self, mask: MaskVector) -> Self {
        self.base_mask = mask;
        self
    }

    pub fn with_hyper(mut self, hyper: RetroHyperParams) -> Self {
        self.hyper = hyper;
        self
    }

    pub fn with_exclude_history(mut self, exclude: bool) -> Self {
        self.exclude_history = exclude;
        self
    }

    fn validate(&self, params: &ScorerParams) -> Result<()> {
        if self.k == 0 {
            return Err(Error::contract("K must be at least 1"));
        }
        params.check_item(self.target)?;
        if self.base_mask.len() != self.window.capacity() {
            return Err(Error::contract(format!(
                "mask length {} does not match window capacity {}",
                self.base_mask.len(),
                self.window.capacity()
            )));
        }
        if self.base_mask.mode() != MaskMode::Binary {
            return Err(Error::contract("the base mask must be binary"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationKind {
    Retrospective,
    Prospective,
}

/// How a retrospective explanation was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Search,
    Relax,
    Random,
    Similarity,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Search, Method::Relax, Method::Random, Method::Similarity];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Search => "search",
            Method::Relax => "relax",
            Method::Random => "random",
            Method::Similarity => "similarity",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "search" | "greedy" => Ok(Method::Search),
            "relax" | "relaxed" | "relaxation" => Ok(Method::Relax),
            "random" => Ok(Method::Random),
            "similarity" | "sim" => Ok(Method::Similarity),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Success,
    Failure,
}

/// Outcome of one explanation request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub kind: ExplanationKind,
    pub method: Option<Method>,
    pub target: Option<ItemId>,
    /// 0-based rank of the target in the original list.
    pub target_rank: Option<usize>,
    /// Newly revoked `(position, item)` pairs, ascending by position.
    /// Empty on failure.
    pub revoked: Vec<(usize, ItemId)>,
    /// Items a new interaction brings into the list, in list order.
    pub added_items: Vec<ItemId>,
    pub status: Status,
    /// Positions revoked by the greedy loop or optimiser steps taken.
    pub iterations: usize,
    /// The mask the answer was checked against (base revocations included).
    pub final_mask: MaskVector,
    /// Positions flagged by the relaxation before the post-check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl ExplanationRecord {
    pub fn is_success(&self) -> bool {
        self.status == Status::Success
    }

    pub fn revoked_items(&self) -> Vec<ItemId> {
        self.revoked.iter().map(|&(_, i)| i).collect()
    }

    pub fn revoked_positions(&self) -> Vec<usize> {
        self.revoked.iter().map(|&(t, _)| t).collect()
    }

    /// One line of the structured report.
    pub fn report_line(&self, user: Option<UserId>) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            user: Option<UserId>,
            kind: ExplanationKind,
            #[serde(skip_serializing_if = "Option::is_none")]
            method: Option<Method>,
            #[serde(skip_serializing_if = "Option::is_none")]
            target: Option<ItemId>,
            status: Status,
            revoked: Vec<ItemId>,
            #[serde(skip_serializing_if = "<[ItemId]>::is_empty")]
            added: &'a [ItemId],
            iterations: usize,
        }
        let line = Line {
            user,
            kind: self.kind,
            method: self.method,
            target: self.target,
            status: self.status,
            revoked: self.revoked_items(),
            added: &self.added_items,
            iterations: self.iterations,
        };
        serde_json::to_string(&line).expect("record serialises")
    }
}

/// A validated retrospective request bound to a model: the prepared
/// window, the current binary mask, the original list and the positions
/// that may be revoked.
pub struct Search<'a> {
    pub(crate) params: &'a ScorerParams,
    pub(crate) prepared: PreparedWindow<'a>,
    pub(crate) req: &'a RetroRequest,
    pub(crate) mask: Vec<f64>,
    pub(crate) original: RecommendationList,
    pub(crate) candidates: Vec<usize>,
}

impl<'a> Search<'a> {
    pub fn new(params: &'a ScorerParams, req: &'a RetroRequest) -> Result<Self> {
        req.validate(params)?;
        let prepared = params.prepare(&req.window)?;
        let mask = req.base_mask.values().to_vec();
        let original = recommend_prepared(params, &prepared, &req.window, &mask, req.k, req.exclude_history);
        if !original.contains(req.target) {
            return Err(Error::Precondition(format!(
                "item {} is not in the top-{} list",
                req.target, req.k
            )));
        }
        let candidates = req.window.occupied_positions().filter(|&t| mask[t] < 0.5).collect();
        Ok(Search {
            params,
            prepared,
            req,
            mask,
            original,
            candidates,
        })
    }

    pub fn original(&self) -> &RecommendationList {
        &self.original
    }

    /// Occupied, not yet revoked positions, ascending.
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn target_rank(&self) -> Option<usize> {
        self.original.position(self.req.target)
    }

    /// Other items of the original list.
    pub fn others(&self) -> Vec<ItemId> {
        self.original.items().filter(|&i| i != self.req.target).collect()
    }

    pub fn target_removed(&self, mask: &[f64]) -> bool {
        let list = recommend_prepared(
            self.params,
            &self.prepared,
            &self.req.window,
            mask,
            self.req.k,
            self.req.exclude_history,
        );
        !list.contains(self.req.target)
    }

    /// Revokes positions in the order chosen by `next` until the target
    /// leaves the list or every candidate is revoked.
    pub(crate) fn run(mut self, method: Method, mut next: impl FnMut(&Self, &[usize]) -> usize) -> ExplanationRecord {
        let mut remaining = self.candidates.clone();
        let mut chosen = Vec::new();
        let mut success = false;
        while !remaining.is_empty() {
            let t = next(&self, &remaining);
            remaining.retain(|&r| r != t);
            self.mask[t] = 1.0;
            chosen.push(t);
            if self.target_removed(&self.mask) {
                success = true;
                break;
            }
        }
        let iterations = chosen.len();
        let final_mask = MaskVector::from_values(self.mask.clone(), MaskMode::Binary).expect("binary values");
        let revoked = if success { self.pairs(chosen) } else { Vec::new() };
        ExplanationRecord {
            kind: ExplanationKind::Retrospective,
            method: Some(method),
            target: Some(self.req.target),
            target_rank: self.target_rank(),
            revoked,
            added_items: Vec::new(),
            status: if success { Status::Success } else { Status::Failure },
            iterations,
            final_mask,
            flagged: None,
            diagnostic: None,
        }
    }

    pub(crate) fn pairs(&self, mut positions: Vec<usize>) -> Vec<(usize, ItemId)> {
        positions.sort_unstable();
        positions
            .into_iter()
            .map(|t| (t, self.req.window.slot(t).expect("candidate positions are occupied")))
            .collect()
    }
}

/// Top-`k` recommendation from precomputed scores, used by the relaxation
/// to identify the item at the K-th place.
pub(crate) fn list_from_scores(
    params: &ScorerParams,
    window: &SequenceWindow,
    scores: &[f64],
    mask: &[f64],
    k: usize,
    exclude_history: bool,
) -> RecommendationList {
    let excluded = excluded_items(params.n_items(), window, mask, exclude_history);
    top_k_from_scores(scores, &excluded, k)
}

/// Random-order revocation baseline.
pub fn random_retrospective(params: &ScorerParams, req: &RetroRequest, seed: u64) -> Result<ExplanationRecord> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let search = Search::new(params, req)?;
    let mut order = search.candidates.clone();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut it = order.into_iter();
    Ok(search.run(Method::Random, move |_, _| it.next().expect("one choice per remaining position")))
}

/// Revokes positions in order of decreasing embedding similarity to the
/// target; ties go to the lower position.
pub fn similarity_retrospective(params: &ScorerParams, req: &RetroRequest) -> Result<ExplanationRecord> {
    let search = Search::new(params, req)?;
    let target = params.embedding(req.target);
    let mut order: Vec<(usize, f64)> = search
        .candidates
        .iter()
        .map(|&t| {
            let item = req.window.slot(t).expect("occupied");
            (t, crate::linalg::dot(params.embedding(item), target))
        })
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut it = order.into_iter().map(|(t, _)| t);
    Ok(search.run(Method::Similarity, move |_, _| it.next().expect("one choice per remaining position")))
}

/// Dispatches to the solver for `method`. `seed` is only used by the
/// random baseline.
pub fn explain_retrospective(
    params: &ScorerParams,
    req: &RetroRequest,
    method: Method,
    seed: u64,
) -> Result<ExplanationRecord> {
    match method {
        Method::Search => greedy_retrospective(params, req),
        Method::Relax => relaxed_retrospective(params, req),
        Method::Random => random_retrospective(params, req, seed),
        Method::Similarity => similarity_retrospective(params, req),
    }
}
