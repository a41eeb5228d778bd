//! Catalog, sequence windows, revocation masks, the differentiable scorers
//! and top-K recommendation.
//!
//! Every scorer maps a window of item embeddings to a single
//! representation vector and scores candidate items by inner product with
//! their embeddings. Revoking position `t` multiplies its item embedding by
//! `1 - δ_t`; the padding embedding is the zero vector, so a fully revoked
//! position is indistinguishable from padding.

mod attention;
mod gru;
pub mod optim;
pub mod persist;
mod pooling;
pub mod train;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Matrix};
use crate::{Error, Result};

pub use train::{train, TrainConfig, TrainReport, TrainingSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ItemId {
    fn from(v: usize) -> Self {
        ItemId(v as u32)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl UserId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense user and item index spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Catalog {
    pub n_items: usize,
    pub n_users: usize,
}

impl Catalog {
    pub fn new(n_items: usize, n_users: usize) -> Result<Self> {
        if n_items == 0 || n_users == 0 {
            return Err(Error::contract("catalog needs at least one item and one user"));
        }
        Ok(Catalog { n_items, n_users })
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> {
        (0..self.n_items).map(ItemId::from)
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> {
        (0..self.n_users as u32).map(UserId)
    }
}

/// The last `T` interactions of a user, left-padded. Slot `T - 1` is the
/// most recent interaction; `None` is the padding item.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceWindow {
    slots: Vec<Option<ItemId>>,
}

impl SequenceWindow {
    /// Keeps the last `capacity` items of `history` (chronological order).
    pub fn from_history(history: &[ItemId], capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        let tail = &history[history.len().saturating_sub(capacity)..];
        let mut slots = vec![None; capacity - tail.len()];
        slots.extend(tail.iter().copied().map(Some));
        SequenceWindow { slots }
    }

    pub fn from_slots(slots: Vec<Option<ItemId>>) -> Self {
        assert!(!slots.is_empty(), "window capacity must be positive");
        SequenceWindow { slots }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Option<ItemId>] {
        &self.slots
    }

    pub fn slot(&self, t: usize) -> Option<ItemId> {
        self.slots[t]
    }

    pub fn effective_length(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Positions holding a real item, oldest first.
    pub fn occupied_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().enumerate().filter_map(|(t, s)| s.map(|_| t))
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.slots.iter().flatten().copied()
    }

    /// Appends `item` as the newest interaction; the oldest slot (padding
    /// or the oldest item) is dropped.
    pub fn appended(&self, item: ItemId) -> Self {
        let mut slots = self.slots[1..].to_vec();
        slots.push(Some(item));
        SequenceWindow { slots }
    }

    /// Same window with slot `t` replaced by the padding item.
    pub fn with_padding_at(&self, t: usize) -> Self {
        let mut slots = self.slots.clone();
        slots[t] = None;
        SequenceWindow { slots }
    }

    pub fn validate(&self, n_items: usize) -> Result<()> {
        for item in self.items() {
            if item.idx() >= n_items {
                return Err(Error::InvalidItem(item.idx()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Binary,
    Relaxed,
}

/// Per-position revocation vector (`δ_t = 1` revokes position `t`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskVector {
    values: Vec<f64>,
    mode: MaskMode,
}

impl MaskVector {
    pub fn zeros(len: usize, mode: MaskMode) -> Self {
        MaskVector {
            values: vec![0.0; len],
            mode,
        }
    }

    pub fn binary(len: usize) -> Self {
        Self::zeros(len, MaskMode::Binary)
    }

    pub fn relaxed(len: usize) -> Self {
        Self::zeros(len, MaskMode::Relaxed)
    }

    pub fn from_positions(len: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::binary(len);
        for p in positions {
            m.values[p] = 1.0;
        }
        m
    }

    pub fn from_values(values: Vec<f64>, mode: MaskMode) -> Result<Self> {
        let ok = match mode {
            MaskMode::Binary => values.iter().all(|&v| v == 0.0 || v == 1.0),
            MaskMode::Relaxed => values.iter().all(|&v| (0.0..=1.0).contains(&v)),
        };
        if !ok {
            return Err(Error::contract(format!("mask values out of range for {mode:?} mode")));
        }
        Ok(MaskVector { values, mode })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, t: usize) -> f64 {
        self.values[t]
    }

    pub fn is_revoked(&self, t: usize) -> bool {
        self.values[t] >= 0.5
    }

    pub fn set(&mut self, t: usize, revoked: bool) {
        self.values[t] = if revoked { 1.0 } else { 0.0 };
    }

    /// Sets a relaxed entry, clipping to `[0, 1]`.
    pub fn set_relaxed(&mut self, t: usize, v: f64) {
        debug_assert_eq!(self.mode, MaskMode::Relaxed);
        self.values[t] = v.clamp(0.0, 1.0);
    }

    pub fn revoked_positions(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&t| self.is_revoked(t)).collect()
    }

    /// `‖Δ‖₀`
    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    /// Binarises at `threshold` (entries `>= threshold` become 1).
    pub fn binarize(&self, threshold: f64) -> MaskVector {
        MaskVector {
            values: self
                .values
                .iter()
                .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
                .collect(),
            mode: MaskMode::Binary,
        }
    }

    /// Shifts left by one and appends an unrevoked entry, mirroring
    /// [`SequenceWindow::appended`].
    pub fn appended(&self) -> MaskVector {
        let mut values = self.values[1..].to_vec();
        values.push(0.0);
        MaskVector { values, mode: self.mode }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// Single-layer GRU over the window; the final hidden state is the
    /// sequence representation.
    Gru,
    /// One causal self-attention block (single head) with learned positions.
    Attention,
    /// Sum of the (masked) item embeddings. Linear in the mask, which makes
    /// it the reference scorer for analytic tests.
    Pooling,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Gru => "gru",
            ScorerKind::Attention => "attention",
            ScorerKind::Pooling => "pooling",
        }
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gru" => Ok(ScorerKind::Gru),
            "attention" | "self-attention" | "sasrec" => Ok(ScorerKind::Attention),
            "pooling" | "linear" => Ok(ScorerKind::Pooling),
            other => Err(Error::Config(format!("unknown scorer kind {other:?}"))),
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n_items: usize,
    pub dim: usize,
    pub window: usize,
}

/// Tensor 0 is always the item embedding table.
pub(crate) const ITEM_EMB: usize = 0;

/// Learnable state of a scorer. Immutable once trained; all inference
/// methods take `&self`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorerParams {
    kind: ScorerKind,
    dims: Dims,
    tensors: Vec<Matrix>,
    trained: bool,
}

impl ScorerParams {
    /// Randomly initialised parameters.
    pub fn init(kind: ScorerKind, dims: Dims, rng: &mut impl Rng) -> Self {
        let tensors = schema(kind, dims)
            .into_iter()
            .map(|spec| spec.init.sample(spec.rows, spec.cols, rng))
            .collect();
        ScorerParams {
            kind,
            dims,
            tensors,
            trained: false,
        }
    }

    /// Builds parameters from explicit tensors, validated against the
    /// scorer's schema.
    pub fn from_tensors(kind: ScorerKind, dims: Dims, tensors: Vec<Matrix>, trained: bool) -> Result<Self> {
        let spec = schema(kind, dims);
        if spec.len() != tensors.len() {
            return Err(Error::Format(format!(
                "{kind} expects {} tensors, got {}",
                spec.len(),
                tensors.len()
            )));
        }
        for (s, t) in spec.iter().zip(&tensors) {
            if (s.rows, s.cols) != t.shape() {
                return Err(Error::Format(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    s.name,
                    t.shape(),
                    (s.rows, s.cols)
                )));
            }
            if !t.is_finite() {
                return Err(Error::Format(format!("tensor {} has non-finite values", s.name)));
            }
        }
        Ok(ScorerParams {
            kind,
            dims,
            tensors,
            trained,
        })
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_items(&self) -> usize {
        self.dims.n_items
    }

    pub fn window(&self) -> usize {
        self.dims.window
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub(crate) fn mark_trained(&mut self) {
        self.trained = true;
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        schema(self.kind, self.dims).into_iter().map(|s| s.name).collect()
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.tensors[ITEM_EMB]
    }

    pub fn embedding(&self, item: ItemId) -> &[f64] {
        self.tensors[ITEM_EMB].row(item.idx())
    }

    pub fn check_item(&self, item: ItemId) -> Result<()> {
        if item.idx() >= self.dims.n_items {
            return Err(Error::InvalidItem(item.idx()));
        }
        Ok(())
    }

    fn check_window(&self, window: &SequenceWindow) -> Result<()> {
        if window.capacity() != self.dims.window {
            return Err(Error::contract(format!(
                "window capacity {} does not match model window {}",
                window.capacity(),
                self.dims.window
            )));
        }
        window.validate(self.dims.n_items)
    }

    /// Precomputes the window-dependent terms so the representation can be
    /// re-evaluated cheaply under many masks.
    pub fn prepare(&self, window: &SequenceWindow) -> Result<PreparedWindow<'_>> {
        self.check_window(window)?;
        Ok(match self.kind {
            ScorerKind::Gru => PreparedWindow::Gru(gru::Prepared::new(self, window)),
            ScorerKind::Attention => PreparedWindow::Attention(attention::Prepared::new(self, window)),
            ScorerKind::Pooling => PreparedWindow::Pooling(pooling::Prepared::new(self, window)),
        })
    }

    /// Scores for every catalog item given a sequence representation.
    pub fn scores_for(&self, rep: &[f64]) -> Vec<f64> {
        let emb = self.embeddings();
        (0..emb.rows).map(|r| dot(emb.row(r), rep)).collect()
    }

    pub fn score_of(&self, rep: &[f64], item: ItemId) -> f64 {
        dot(self.embedding(item), rep)
    }

    /// Representation computed on the autodiff tape, in inference mode.
    /// Slower than [`prepare`](Self::prepare) and used to cross-check it.
    pub fn represent_on_tape(&self, window: &SequenceWindow, mask: &[f64]) -> Result<Vec<f64>> {
        self.check_window(window)?;
        if mask.len() != window.capacity() {
            return Err(Error::contract("mask length does not match the window"));
        }
        let mut tape = crate::autodiff::Tape::new(&self.tensors);
        let m = tape.input(Matrix::from_vec(mask.len(), 1, mask.to_vec()));
        let out = self.graph(&mut tape, window, Some(m), None);
        Ok(tape.value(out).row(window.capacity() - 1).to_vec())
    }

    /// Builds the training graph (all positions) on `tape`. `mask`, when
    /// given, is a `T × 1` input node of revocation values.
    pub(crate) fn graph(
        &self,
        tape: &mut crate::autodiff::Tape<'_>,
        window: &SequenceWindow,
        mask: Option<crate::autodiff::Var>,
        dropout: Option<&mut train::Dropout<'_>>,
    ) -> crate::autodiff::Var {
        match self.kind {
            ScorerKind::Gru => gru::graph(tape, self.dims, window, mask, dropout),
            ScorerKind::Attention => attention::graph(tape, self.dims, window, mask, dropout),
            ScorerKind::Pooling => pooling::graph(tape, self.dims, window, mask, dropout),
        }
    }
}

/// Window-specific precomputation for one scorer.
pub enum PreparedWindow<'a> {
    Gru(gru::Prepared<'a>),
    Attention(attention::Prepared<'a>),
    Pooling(pooling::Prepared<'a>),
}

impl PreparedWindow<'_> {
    /// Sequence representation under revocation values `mask`.
    pub fn represent(&self, mask: &[f64]) -> Vec<f64> {
        match self {
            PreparedWindow::Gru(p) => p.represent(mask),
            PreparedWindow::Attention(p) => p.represent(mask),
            PreparedWindow::Pooling(p) => p.represent(mask),
        }
    }

    /// Representations with each of `positions` additionally revoked,
    /// one position at a time.
    pub fn represent_flips(&self, mask: &[f64], positions: &[usize]) -> Vec<Vec<f64>> {
        match self {
            PreparedWindow::Gru(p) => p.represent_flips(mask, positions),
            _ => {
                let mut trial = mask.to_vec();
                positions
                    .iter()
                    .map(|&t| {
                        let keep = std::mem::replace(&mut trial[t], 1.0);
                        let rep = self.represent(&trial);
                        trial[t] = keep;
                        rep
                    })
                    .collect()
            }
        }
    }

    /// Returns the representation and `∂⟨g, rep⟩/∂mask`.
    pub fn represent_vjp(&self, mask: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.represent_vjp_with(mask, |_| g.to_vec())
    }

    /// Like [`represent_vjp`](Self::represent_vjp), but the upstream
    /// gradient is computed from the representation of the same pass.
    pub fn represent_vjp_with(&self, mask: &[f64], upstream: impl FnOnce(&[f64]) -> Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        match self {
            PreparedWindow::Gru(p) => p.represent_vjp_with(mask, upstream),
            PreparedWindow::Attention(p) => p.represent_vjp_with(mask, upstream),
            PreparedWindow::Pooling(p) => p.represent_vjp_with(mask, upstream),
        }
    }
}

/// Element-wise application of a mask to the window's embeddings:
/// row `t` is `(1 - δ_t) · e_t`, padding rows are zero.
pub fn apply_mask(params: &ScorerParams, window: &SequenceWindow, mask: &MaskVector) -> Result<Matrix> {
    if mask.len() != window.capacity() {
        return Err(Error::contract(format!(
            "mask length {} does not match window capacity {}",
            mask.len(),
            window.capacity()
        )));
    }
    window.validate(params.n_items())?;
    let d = params.dims().dim;
    let mut out = Matrix::zeros(window.capacity(), d);
    for (t, slot) in window.slots().iter().enumerate() {
        if let Some(item) = slot {
            let keep = 1.0 - mask.get(t);
            for (o, e) in out.row_mut(t).iter_mut().zip(params.embedding(*item)) {
                *o = keep * e;
            }
        }
    }
    Ok(out)
}

fn check_mask(window: &SequenceWindow, mask: &MaskVector) -> Result<()> {
    if mask.len() != window.capacity() {
        return Err(Error::contract(format!(
            "mask length {} does not match window capacity {}",
            mask.len(),
            window.capacity()
        )));
    }
    Ok(())
}

/// `r_ij = f(v_j, S_i ⊙ (1 - Δ))` in inference mode.
pub fn score(params: &ScorerParams, window: &SequenceWindow, mask: &MaskVector, item: ItemId) -> Result<f64> {
    params.check_item(item)?;
    check_mask(window, mask)?;
    let rep = params.prepare(window)?.represent(mask.values());
    Ok(params.score_of(&rep, item))
}

/// Scores and exact mask gradients for each requested item.
pub fn score_gradient(
    params: &ScorerParams,
    window: &SequenceWindow,
    mask: &MaskVector,
    items: &[ItemId],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if mask.mode() != MaskMode::Relaxed {
        return Err(Error::contract("score_gradient requires a relaxed mask"));
    }
    check_mask(window, mask)?;
    for &item in items {
        params.check_item(item)?;
    }
    let prepared = params.prepare(window)?;
    let mut scores = Vec::with_capacity(items.len());
    let mut grads = Vec::with_capacity(items.len());
    for &item in items {
        let (rep, grad) = prepared.represent_vjp(mask.values(), params.embedding(item));
        scores.push(params.score_of(&rep, item));
        grads.push(grad);
    }
    Ok((scores, grads))
}

/// An ordered top-K list; scores are non-increasing and ties go to the
/// lower item id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub entries: Vec<(ItemId, f64)>,
    pub k: usize,
    /// Set when fewer than `k` items were eligible.
    pub truncated: bool,
}

impl RecommendationList {
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.entries.iter().map(|(i, _)| *i)
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.entries.iter().any(|(i, _)| *i == item)
    }

    pub fn position(&self, item: ItemId) -> Option<usize> {
        self.entries.iter().position(|(i, _)| *i == item)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ranking order: higher score first, then lower item id.
#[inline]
pub(crate) fn ranks_before(a: (usize, f64), b: (usize, f64)) -> bool {
    match b.1.total_cmp(&a.1) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.0 < b.0,
    }
}

/// Top-`k` over `scores` skipping items flagged in `excluded`.
pub(crate) fn top_k_from_scores(scores: &[f64], excluded: &[bool], k: usize) -> RecommendationList {
    let mut eligible: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.get(*i).copied().unwrap_or(false))
        .map(|(i, &s)| (i, s))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    let truncated = eligible.len() < k;
    if eligible.len() > k {
        eligible.select_nth_unstable_by(k - 1, cmp);
        eligible.truncate(k);
    }
    eligible.sort_unstable_by(cmp);
    RecommendationList {
        entries: eligible.into_iter().map(|(i, s)| (ItemId::from(i), s)).collect(),
        k,
        truncated,
    }
}

/// Items barred from recommendation: those at non-revoked window positions.
pub(crate) fn excluded_items(n_items: usize, window: &SequenceWindow, mask: &[f64], exclude_history: bool) -> Vec<bool> {
    let mut excluded = vec![false; n_items];
    if exclude_history {
        for (t, slot) in window.slots().iter().enumerate() {
            if let Some(item) = slot {
                if mask[t] < 0.5 {
                    excluded[item.idx()] = true;
                }
            }
        }
    }
    excluded
}

/// The `k` highest-scoring eligible items under `mask`.
pub fn recommend_top_k(
    params: &ScorerParams,
    window: &SequenceWindow,
    mask: &MaskVector,
    k: usize,
    exclude_history: bool,
) -> Result<RecommendationList> {
    if k == 0 {
        return Err(Error::contract("K must be at least 1"));
    }
    check_mask(window, mask)?;
    let prepared = params.prepare(window)?;
    Ok(recommend_prepared(params, &prepared, window, mask.values(), k, exclude_history))
}

pub(crate) fn recommend_prepared(
    params: &ScorerParams,
    prepared: &PreparedWindow<'_>,
    window: &SequenceWindow,
    mask: &[f64],
    k: usize,
    exclude_history: bool,
) -> RecommendationList {
    let rep = prepared.represent(mask);
    let scores = params.scores_for(&rep);
    let excluded = excluded_items(params.n_items(), window, mask, exclude_history);
    let list = top_k_from_scores(&scores, &excluded, k);
    if list.truncated {
        log::warn!("only {} eligible items for a top-{} list", list.len(), k);
    }
    list
}

/// Parameter initialisation schemes.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Init {
    Normal(f64),
    Xavier,
    Zeros,
    Ones,
}

impl Init {
    fn sample(self, rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        use rand_distr::{Distribution, Normal, Uniform};
        let n = rows * cols;
        let data = match self {
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("valid std");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                let dist = Uniform::new_inclusive(-a, a).expect("valid range");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
        };
        Matrix::from_vec(rows, cols, data)
    }
}

pub(crate) struct TensorSpec {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub init: Init,
}

pub(crate) fn schema(kind: ScorerKind, dims: Dims) -> Vec<TensorSpec> {
    let emb = TensorSpec {
        name: "item_embedding",
        rows: dims.n_items,
        cols: dims.dim,
        init: Init::Normal(1.0 / (dims.dim as f64).sqrt()),
    };
    let mut specs = vec![emb];
    match kind {
        ScorerKind::Gru => specs.extend(gru::schema(dims)),
        ScorerKind::Attention => specs.extend(attention::schema(dims)),
        ScorerKind::Pooling => {}
    }
    specs
}

#[cfg(test)]
mod tests;
