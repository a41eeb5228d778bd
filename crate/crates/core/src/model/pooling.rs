//! Sum-pooling scorer: `rep = Σ_t (1 - δ_t) e_t`, so
//! `score_j = Σ_t (1 - δ_t) ⟨e_t, e_j⟩`.

use super::train::Dropout;
use super::{Dims, ScorerParams, SequenceWindow, ITEM_EMB};
use crate::autodiff::{Tape, Var};
use crate::linalg::{axpy, dot, Matrix};

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
    // Prefix sums: row t of the output pools slots 0..=t.
    let t = dims.window;
    let mut lower = Matrix::zeros(t, t);
    for i in 0..t {
        lower.row_mut(i)[..=i].iter_mut().for_each(|v| *v = 1.0);
    }
    let lower = tape.input(lower);
    tape.matmul(lower, x)
}

pub struct Prepared<'a> {
    params: &'a ScorerParams,
    window: SequenceWindow,
}

impl<'a> Prepared<'a> {
    pub(super) fn new(params: &'a ScorerParams, window: &SequenceWindow) -> Self {
        Prepared {
            params,
            window: window.clone(),
        }
    }

    pub fn represent(&self, mask: &[f64]) -> Vec<f64> {
        let mut rep = vec![0.0; self.params.dims().dim];
        for (t, slot) in self.window.slots().iter().enumerate() {
            if let Some(item) = slot {
                axpy(1.0 - mask[t], self.params.embedding(*item), &mut rep);
            }
        }
        rep
    }

    pub fn represent_vjp_with(&self, mask: &[f64], upstream: impl FnOnce(&[f64]) -> Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let rep = self.represent(mask);
        let g = upstream(&rep);
        let grad = self
            .window
            .slots()
            .iter()
            .map(|slot| match slot {
                Some(item) => -dot(&g, self.params.embedding(*item)),
                None => 0.0,
            })
            .collect();
        (rep, grad)
    }
}
