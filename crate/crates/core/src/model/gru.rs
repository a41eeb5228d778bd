//! Single-layer GRU scorer.
//!
//! Row-vector convention: for input `x` and previous state `h`
//!
//! ```text
//! z  = σ(x W_z + h U_z + b_z)
//! r  = σ(x W_r + h U_r + b_r)
//! n  = tanh(x W_n + b_n + r ⊙ (h U_n + b_hn))
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```
//!
//! with `h_0 = 0`. The representation is the final state.

use super::train::Dropout;
use super::{Dims, Init, ScorerParams, SequenceWindow, TensorSpec, ITEM_EMB};
use crate::autodiff::{Tape, Var};
use crate::linalg::{dot, sigmoid, vecmat_acc, vecmat_into, Matrix};

const W_Z: usize = 1;
const W_R: usize = 2;
const W_N: usize = 3;
const U_Z: usize = 4;
const U_R: usize = 5;
const U_N: usize = 6;
const B_Z: usize = 7;
const B_R: usize = 8;
const B_N: usize = 9;
const B_HN: usize = 10;

pub(super) fn schema(dims: Dims) -> Vec<TensorSpec> {
    let d = dims.dim;
    let sq = |name| TensorSpec {
        name,
        rows: d,
        cols: d,
        init: Init::Xavier,
    };
    let bias = |name| TensorSpec {
        name,
        rows: 1,
        cols: d,
        init: Init::Zeros,
    };
    vec![
        sq("w_z"),
        sq("w_r"),
        sq("w_n"),
        sq("u_z"),
        sq("u_r"),
        sq("u_n"),
        bias("b_z"),
        bias("b_r"),
        bias("b_n"),
        bias("b_hn"),
    ]
}

pub(super) fn graph(
    tape: &mut Tape<'_>,
    dims: Dims,
    window: &SequenceWindow,
    mask: Option<Var>,
    dropout: Option<&mut Dropout<'_>>,
) -> Var {
    let rows: Vec<Option<usize>> = window.slots().iter().map(|s| s.map(|i| i.idx())).collect();
    let mut x = tape.gather(ITEM_EMB, &rows);
    if let Some(m) = mask {
        let keep = tape.one_minus(m);
        x = tape.scale_rows(x, keep);
    }
    if let Some(dp) = dropout {
        x = dp.apply(tape, x);
    }
    let (w_z, w_r, w_n) = (tape.param(W_Z), tape.param(W_R), tape.param(W_N));
    let (u_z, u_r, u_n) = (tape.param(U_Z), tape.param(U_R), tape.param(U_N));
    let (b_z, b_r, b_n, b_hn) = (tape.param(B_Z), tape.param(B_R), tape.param(B_N), tape.param(B_HN));

    let xz = tape.matmul(x, w_z);
    let xz = tape.add_row(xz, b_z);
    let xr = tape.matmul(x, w_r);
    let xr = tape.add_row(xr, b_r);
    let xn = tape.matmul(x, w_n);
    let xn = tape.add_row(xn, b_n);

    let mut h = tape.input(Matrix::zeros(1, dims.dim));
    let mut outs = Vec::with_capacity(window.capacity());
    for t in 0..window.capacity() {
        let az = tape.row(xz, t);
        let hz = tape.matmul(h, u_z);
        let pre_z = tape.add(az, hz);
        let z = tape.sigmoid(pre_z);

        let ar = tape.row(xr, t);
        let hr = tape.matmul(h, u_r);
        let pre_r = tape.add(ar, hr);
        let r = tape.sigmoid(pre_r);

        let hn = tape.matmul(h, u_n);
        let m = tape.add(hn, b_hn);
        let rm = tape.mul(r, m);
        let an = tape.row(xn, t);
        let pre_n = tape.add(an, rm);
        let n = tape.tanh(pre_n);

        let keep = tape.one_minus(z);
        let a = tape.mul(keep, n);
        let b = tape.mul(z, h);
        h = tape.add(a, b);
        outs.push(h);
    }
    tape.stack_rows(outs)
}

/// Input projections of each slot's embedding, computed once per window,
/// and the recurrent weights packed side by side.
pub struct Prepared<'a> {
    params: &'a ScorerParams,
    /// `e_t W_z`, `e_t W_r`, `e_t W_n` per slot (zero rows for padding).
    proj_z: Matrix,
    proj_r: Matrix,
    proj_n: Matrix,
    /// Row `k` is `[U_z[k] | U_r[k] | U_n[k]]`.
    u: Matrix,
    /// `[b_z | b_r | b_hn]`.
    u_bias: Vec<f64>,
}

struct Step {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    m: Vec<f64>,
    n: Vec<f64>,
}

impl<'a> Prepared<'a> {
    pub(super) fn new(params: &'a ScorerParams, window: &SequenceWindow) -> Self {
        let t = window.capacity();
        let d = params.dims().dim;
        let w = params.tensors();
        let mut proj_z = Matrix::zeros(t, d);
        let mut proj_r = Matrix::zeros(t, d);
        let mut proj_n = Matrix::zeros(t, d);
        for (pos, slot) in window.slots().iter().enumerate() {
            if let Some(item) = slot {
                let e = params.embedding(*item);
                vecmat_into(e, &w[W_Z], proj_z.row_mut(pos));
                vecmat_into(e, &w[W_R], proj_r.row_mut(pos));
                vecmat_into(e, &w[W_N], proj_n.row_mut(pos));
            }
        }
        let mut u = Matrix::zeros(d, 3 * d);
        for k in 0..d {
            let row = u.row_mut(k);
            row[..d].copy_from_slice(w[U_Z].row(k));
            row[d..2 * d].copy_from_slice(w[U_R].row(k));
            row[2 * d..].copy_from_slice(w[U_N].row(k));
        }
        let u_bias = [w[B_Z].data.as_slice(), &w[B_R].data, &w[B_HN].data].concat();
        Prepared {
            params,
            proj_z,
            proj_r,
            proj_n,
            u,
            u_bias,
        }
    }

    /// One recurrence step at slot `t`; `pre` is scratch of length `3d`.
    /// Returns the new state and fills `gates` with `(z, r, m, n)` when asked.
    #[inline]
    fn step(&self, t: usize, keep: f64, h: &[f64], pre: &mut [f64], next: &mut [f64], gates: Option<&mut Step>) {
        let w = self.params.tensors();
        let d = h.len();
        pre.copy_from_slice(&self.u_bias);
        vecmat_acc(h, &self.u, pre);
        let (hz, rest) = pre.split_at(d);
        let (hr, m) = rest.split_at(d);
        let (pz, pr, pn) = (self.proj_z.row(t), self.proj_r.row(t), self.proj_n.row(t));
        let bn = &w[B_N].data;
        match gates {
            None => {
                for c in 0..d {
                    let z = sigmoid(keep * pz[c] + hz[c]);
                    let r = sigmoid(keep * pr[c] + hr[c]);
                    let n = (keep * pn[c] + bn[c] + r * m[c]).tanh();
                    next[c] = (1.0 - z) * n + z * h[c];
                }
            }
            Some(s) => {
                for c in 0..d {
                    s.z[c] = sigmoid(keep * pz[c] + hz[c]);
                    s.r[c] = sigmoid(keep * pr[c] + hr[c]);
                    s.m[c] = m[c];
                    s.n[c] = (keep * pn[c] + bn[c] + s.r[c] * m[c]).tanh();
                    next[c] = (1.0 - s.z[c]) * s.n[c] + s.z[c] * h[c];
                }
            }
        }
    }

    /// Runs slots `from..` starting at state `h`.
    fn run_from(&self, mask: &[f64], from: usize, h: &[f64]) -> Vec<f64> {
        let d = h.len();
        let mut h = h.to_vec();
        let mut next = vec![0.0; d];
        let mut pre = vec![0.0; 3 * d];
        for (t, &delta) in mask.iter().enumerate().skip(from) {
            self.step(t, 1.0 - delta, &h, &mut pre, &mut next, None);
            std::mem::swap(&mut h, &mut next);
        }
        h
    }

    pub fn represent(&self, mask: &[f64]) -> Vec<f64> {
        let d = self.params.dims().dim;
        self.run_from(mask, 0, &vec![0.0; d])
    }

    /// Representations with each of `positions` revoked on top of `mask`.
    /// States before the earliest position are shared.
    pub fn represent_flips(&self, mask: &[f64], positions: &[usize]) -> Vec<Vec<f64>> {
        let d = self.params.dims().dim;
        let last = positions.iter().copied().max().unwrap_or(0);
        // states[t] is the state entering slot t.
        let mut states = Vec::with_capacity(last + 1);
        let mut h = vec![0.0; d];
        let mut next = vec![0.0; d];
        let mut pre = vec![0.0; 3 * d];
        for (t, &delta) in mask.iter().enumerate().take(last + 1) {
            states.push(h.clone());
            self.step(t, 1.0 - delta, &h, &mut pre, &mut next, None);
            std::mem::swap(&mut h, &mut next);
        }
        positions
            .iter()
            .map(|&p| {
                let mut h = vec![0.0; d];
                self.step(p, 0.0, &states[p], &mut pre, &mut h, None);
                self.run_from(mask, p + 1, &h)
            })
            .collect()
    }

    /// Backpropagation through time from `∂L/∂h_T = upstream(h_T)` to the mask.
    pub fn represent_vjp_with(&self, mask: &[f64], upstream: impl FnOnce(&[f64]) -> Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let d = self.params.dims().dim;
        let mut trace: Vec<Step> = Vec::with_capacity(mask.len());
        let mut h = vec![0.0; d];
        let mut pre = vec![0.0; 3 * d];
        for (t, &delta) in mask.iter().enumerate() {
            let mut s = Step {
                h_prev: Vec::new(),
                z: vec![0.0; d],
                r: vec![0.0; d],
                m: vec![0.0; d],
                n: vec![0.0; d],
            };
            let mut next = vec![0.0; d];
            self.step(t, 1.0 - delta, &h, &mut pre, &mut next, Some(&mut s));
            s.h_prev = std::mem::replace(&mut h, next);
            trace.push(s);
        }
        let rep = h;
        let g = upstream(&rep);
        let mut grad_mask = vec![0.0; mask.len()];
        let mut dh = g;
        // [∂pre_z | ∂pre_r | ∂m], matching the packed recurrent weights.
        let mut dpre = vec![0.0; 3 * d];
        let mut dh_prev = vec![0.0; d];
        for t in (0..mask.len()).rev() {
            let s = &trace[t];
            let (d_pre_z, rest) = dpre.split_at_mut(d);
            let (d_pre_r, dm) = rest.split_at_mut(d);
            let mut n_dot = 0.0;
            let pn = self.proj_n.row(t);
            for c in 0..d {
                let dn = dh[c] * (1.0 - s.z[c]);
                let dz = dh[c] * (s.h_prev[c] - s.n[c]);
                dh_prev[c] = dh[c] * s.z[c];
                let d_pre_n = dn * (1.0 - s.n[c] * s.n[c]);
                n_dot += d_pre_n * pn[c];
                let dr = d_pre_n * s.m[c];
                dm[c] = d_pre_n * s.r[c];
                d_pre_z[c] = dz * s.z[c] * (1.0 - s.z[c]);
                d_pre_r[c] = dr * s.r[c] * (1.0 - s.r[c]);
            }
            // h_prev feeds the three recurrent products.
            for (k, v) in dh_prev.iter_mut().enumerate() {
                *v += dot(self.u.row(k), &dpre);
            }
            // The input term at step t is (1 - δ_t) · proj_t.
            grad_mask[t] = -(dot(&dpre[..d], self.proj_z.row(t)) + dot(&dpre[d..2 * d], self.proj_r.row(t)) + n_dot);
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        (rep, grad_mask)
    }
}
