//! One-block, single-head causal self-attention scorer.
//!
//! ```text
//! X  = (1 - δ) ⊙ E_window + P
//! Q̂  = LN₁(X)
//! H  = Q̂ + softmax_causal(Q̂W_q (XW_k)ᵀ / √d) · XW_v
//! B  = LN₂(H)
//! R  = LN₃(B + relu(B W₁ + b₁) W₂ + b₂)
//! ```
//!
//! Keys and values come from the un-normalised input, so both are affine in
//! `δ_t` and can be precomputed per window. Only the last row of `R` is
//! needed at inference time.

use super::train::Dropout;
use super::{Dims, Init, ScorerParams, SequenceWindow, TensorSpec, ITEM_EMB};
use crate::autodiff::{Tape, Var};
use crate::linalg::{axpy, dot, matvec, normalize, normalize_backward, vecmat, vecmat_into, Matrix};

const POS: usize = 1;
const W_Q: usize = 2;
const W_K: usize = 3;
const W_V: usize = 4;
const LN1_G: usize = 5;
const LN1_B: usize = 6;
const W_1: usize = 7;
const B_1: usize = 8;
const W_2: usize = 9;
const B_2: usize = 10;
const LN2_G: usize = 11;
const LN2_B: usize = 12;
const LN3_G: usize = 13;
const LN3_B: usize = 14;

pub(super) fn schema(dims: Dims) -> Vec<TensorSpec> {
    let d = dims.dim;
    let spec = |name, rows, init| TensorSpec {
        name,
        rows,
        cols: d,
        init,
    };
    vec![
        spec("position", dims.window, Init::Normal(1.0 / (d as f64).sqrt())),
        spec("w_q", d, Init::Xavier),
        spec("w_k", d, Init::Xavier),
        spec("w_v", d, Init::Xavier),
        spec("ln1_gain", 1, Init::Ones),
        spec("ln1_bias", 1, Init::Zeros),
        spec("ffn_w1", d, Init::Xavier),
        spec("ffn_b1", 1, Init::Zeros),
        spec("ffn_w2", d, Init::Xavier),
        spec("ffn_b2", 1, Init::Zeros),
        spec("ln2_gain", 1, Init::Ones),
        spec("ln2_bias", 1, Init::Zeros),
        spec("ln3_gain", 1, Init::Ones),
        spec("ln3_bias", 1, Init::Zeros),
    ]
}

pub(super) fn graph(
    tape: &mut Tape<'_>,
    dims: Dims,
    window: &SequenceWindow,
    mask: Option<Var>,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Var {
    let rows: Vec<Option<usize>> = window.slots().iter().map(|s| s.map(|i| i.idx())).collect();
    let mut x = tape.gather(ITEM_EMB, &rows);
    if let Some(m) = mask {
        let keep = tape.one_minus(m);
        x = tape.scale_rows(x, keep);
    }
    let pos = tape.param(POS);
    x = tape.add(x, pos);
    if let Some(dp) = dropout.as_deref_mut() {
        x = dp.apply(tape, x);
    }

    let (g1, b1) = (tape.param(LN1_G), tape.param(LN1_B));
    let qn = tape.layer_norm(x, g1, b1);
    let (wq, wk, wv) = (tape.param(W_Q), tape.param(W_K), tape.param(W_V));
    let q = tape.matmul(qn, wq);
    let k = tape.matmul(x, wk);
    let v = tape.matmul(x, wv);
    let s = tape.matmul_nt(q, k);
    let s = tape.scale(s, 1.0 / (dims.dim as f64).sqrt());
    let a = tape.causal_softmax(s);
    let mut att = tape.matmul(a, v);
    if let Some(dp) = dropout.as_deref_mut() {
        att = dp.apply(tape, att);
    }
    let h = tape.add(qn, att);

    let (g2, b2) = (tape.param(LN2_G), tape.param(LN2_B));
    let bn = tape.layer_norm(h, g2, b2);
    let (w1, fb1, w2, fb2) = (tape.param(W_1), tape.param(B_1), tape.param(W_2), tape.param(B_2));
    let u = tape.matmul(bn, w1);
    let u = tape.add_row(u, fb1);
    let u = tape.relu(u);
    let f = tape.matmul(u, w2);
    let mut f = tape.add_row(f, fb2);
    if let Some(dp) = dropout.as_mut() {
        f = dp.apply(tape, f);
    }
    let c = tape.add(bn, f);
    let (g3, b3) = (tape.param(LN3_G), tape.param(LN3_B));
    tape.layer_norm(c, g3, b3)
}

pub struct Prepared<'a> {
    params: &'a ScorerParams,
    /// `e_t W_k` / `e_t W_v` (zero for padding) and `p_t W_k` / `p_t W_v`.
    key_item: Matrix,
    key_pos: Matrix,
    value_item: Matrix,
    value_pos: Matrix,
    /// Embedding at the last slot (zero for padding).
    last_item: Vec<f64>,
}

/// Intermediate values of the last-row forward pass.
struct Trace {
    keys: Matrix,
    values: Matrix,
    xhat1: Vec<f64>,
    inv1: f64,
    q: Vec<f64>,
    alpha: Vec<f64>,
    xhat2: Vec<f64>,
    inv2: f64,
    pre_relu: Vec<f64>,
    xhat3: Vec<f64>,
    inv3: f64,
}

impl<'a> Prepared<'a> {
    pub(super) fn new(params: &'a ScorerParams, window: &SequenceWindow) -> Self {
        let w = params.tensors();
        let (t, d) = (window.capacity(), params.dims().dim);
        let mut key_item = Matrix::zeros(t, d);
        let mut value_item = Matrix::zeros(t, d);
        for (pos, slot) in window.slots().iter().enumerate() {
            if let Some(item) = slot {
                let e = params.embedding(*item);
                vecmat_into(e, &w[W_K], key_item.row_mut(pos));
                vecmat_into(e, &w[W_V], value_item.row_mut(pos));
            }
        }
        let last_item = window.slots()[t - 1]
            .map(|i| params.embedding(i).to_vec())
            .unwrap_or_else(|| vec![0.0; d]);
        Prepared {
            params,
            key_item,
            key_pos: w[POS].matmul(&w[W_K]),
            value_item,
            value_pos: w[POS].matmul(&w[W_V]),
            last_item,
        }
    }

    fn run(&self, mask: &[f64]) -> (Vec<f64>, Trace) {
        let w = self.params.tensors();
        let (t_len, d) = (mask.len(), self.params.dims().dim);
        let last = t_len - 1;

        let mut keys = self.key_pos.clone();
        let mut values = self.value_pos.clone();
        for (t, &delta) in mask.iter().enumerate() {
            let keep = 1.0 - delta;
            axpy(keep, self.key_item.row(t), keys.row_mut(t));
            axpy(keep, self.value_item.row(t), values.row_mut(t));
        }

        let keep_last = 1.0 - mask[last];
        let mut xhat1: Vec<f64> = w[POS].row(last).to_vec();
        axpy(keep_last, &self.last_item, &mut xhat1);
        let (_, inv1) = normalize(&mut xhat1);
        let y: Vec<f64> = (0..d).map(|c| xhat1[c] * w[LN1_G].data[c] + w[LN1_B].data[c]).collect();
        let q = vecmat(&y, &w[W_Q]);

        let scale = 1.0 / (d as f64).sqrt();
        let mut alpha: Vec<f64> = (0..t_len).map(|t| dot(&q, keys.row(t)) * scale).collect();
        let max = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for a in alpha.iter_mut() {
            *a = (*a - max).exp();
            sum += *a;
        }
        alpha.iter_mut().for_each(|a| *a /= sum);

        let mut hidden = y;
        for (t, &a) in alpha.iter().enumerate() {
            axpy(a, values.row(t), &mut hidden);
        }
        let mut xhat2 = hidden;
        let (_, inv2) = normalize(&mut xhat2);
        let bn: Vec<f64> = (0..d).map(|c| xhat2[c] * w[LN2_G].data[c] + w[LN2_B].data[c]).collect();

        let mut pre_relu = vecmat(&bn, &w[W_1]);
        axpy(1.0, &w[B_1].data, &mut pre_relu);
        let act: Vec<f64> = pre_relu.iter().map(|v| v.max(0.0)).collect();
        let mut c = vecmat(&act, &w[W_2]);
        axpy(1.0, &w[B_2].data, &mut c);
        axpy(1.0, &bn, &mut c);
        let mut xhat3 = c;
        let (_, inv3) = normalize(&mut xhat3);
        let rep: Vec<f64> = (0..d).map(|i| xhat3[i] * w[LN3_G].data[i] + w[LN3_B].data[i]).collect();

        let trace = Trace {
            keys,
            values,
            xhat1,
            inv1,
            q,
            alpha,
            xhat2,
            inv2,
            pre_relu,
            xhat3,
            inv3,
        };
        (rep, trace)
    }

    pub fn represent(&self, mask: &[f64]) -> Vec<f64> {
        self.run(mask).0
    }

    pub fn represent_vjp_with(&self, mask: &[f64], upstream: impl FnOnce(&[f64]) -> Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let w = self.params.tensors();
        let (t_len, d) = (mask.len(), self.params.dims().dim);
        let last = t_len - 1;
        let (rep, tr) = self.run(mask);
        let g = upstream(&rep);

        // rep = LN₃(c)
        let dy3: Vec<f64> = (0..d).map(|i| g[i] * w[LN3_G].data[i]).collect();
        let mut dc = vec![0.0; d];
        normalize_backward(&tr.xhat3, tr.inv3, &dy3, &mut dc);

        // c = bn + relu(bn W₁ + b₁) W₂ + b₂
        let mut dbn = dc.clone();
        let mut dact = matvec(&w[W_2], &dc);
        for (da, &p) in dact.iter_mut().zip(&tr.pre_relu) {
            if p <= 0.0 {
                *da = 0.0;
            }
        }
        axpy(1.0, &matvec(&w[W_1], &dact), &mut dbn);

        // bn = LN₂(y + Σ α_t v_t)
        let dy2: Vec<f64> = (0..d).map(|i| dbn[i] * w[LN2_G].data[i]).collect();
        let mut dhidden = vec![0.0; d];
        normalize_backward(&tr.xhat2, tr.inv2, &dy2, &mut dhidden);

        let mut dy = dhidden.clone();
        let dalpha: Vec<f64> = (0..t_len).map(|t| dot(&dhidden, tr.values.row(t))).collect();
        let weighted = dot(&tr.alpha, &dalpha);
        let scale = 1.0 / (d as f64).sqrt();
        let dscore: Vec<f64> = (0..t_len).map(|t| tr.alpha[t] * (dalpha[t] - weighted) * scale).collect();

        let mut dq = vec![0.0; d];
        let mut grad_mask = vec![0.0; t_len];
        for t in 0..t_len {
            axpy(dscore[t], tr.keys.row(t), &mut dq);
            // keys_t = (1-δ_t) key_item_t + key_pos_t, likewise for values.
            let dkey_dot = dscore[t] * dot(&tr.q, self.key_item.row(t));
            let dval_dot = tr.alpha[t] * dot(&dhidden, self.value_item.row(t));
            grad_mask[t] = -(dkey_dot + dval_dot);
        }
        axpy(1.0, &matvec(&w[W_Q], &dq), &mut dy);

        // y = LN₁(x_last), x_last = (1-δ_last) e_last + p_last
        let dy1: Vec<f64> = (0..d).map(|i| dy[i] * w[LN1_G].data[i]).collect();
        let mut dx_last = vec![0.0; d];
        normalize_backward(&tr.xhat1, tr.inv1, &dy1, &mut dx_last);
        grad_mask[last] -= dot(&dx_last, &self.last_item);

        (rep, grad_mask)
    }
}
