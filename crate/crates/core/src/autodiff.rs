//! A small tape-based reverse-mode differentiator over dense matrices.
//!
//! Only the operations the scorers need are provided. Parameters are read
//! from a borrowed slice and their gradients are accumulated into a caller
//! supplied buffer, so one set of gradient buffers can collect a whole
//! mini-batch of per-sequence tapes.

use crate::linalg::{axpy, dot, normalize, normalize_backward, sigmoid, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param(usize),
    Gather { param: usize, rows: Vec<Option<usize>> },
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ScaleRows(Var, Var),
    Row(Var, usize),
    StackRows(Vec<Var>),
    CausalSoftmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Matrix, inv_std: Vec<f64> },
    RowDot(Var, Var),
    MulConst(Var, Matrix),
    BceLogits { logits: Var, labels: Vec<f64>, weights: Vec<f64> },
    SumAll(Var),
}

struct Node {
    value: Matrix,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p [Matrix],
    nodes: Vec<Node>,
}

/// Gradients of every node after a backward pass.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Matrix]) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(1024),
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// An input whose gradient can be read back after `backward`.
    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn param(&mut self, id: usize) -> Var {
        let value = self.params[id].clone();
        self.push(value, Op::Param(id))
    }

    /// Rows of parameter `id`; `None` yields an all-zero row.
    pub fn gather(&mut self, id: usize, rows: &[Option<usize>]) -> Var {
        let table = &self.params[id];
        let mut out = Matrix::zeros(rows.len(), table.cols);
        for (i, r) in rows.iter().enumerate() {
            if let Some(r) = r {
                out.row_mut(i).copy_from_slice(table.row(*r));
            }
        }
        self.push(
            out,
            Op::Gather {
                param: id,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_nt(self.value(b));
        self.push(v, Op::MatMulNT(a, b))
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "elementwise shape mismatch");
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect();
        Matrix::from_vec(x.rows, x.cols, data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Matrix {
        let x = self.value(a);
        Matrix::from_vec(x.rows, x.cols, x.data.iter().map(|&p| f(p)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |p, q| p + q);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |p, q| p - q);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |p, q| p * q);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds the `1 × c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (x, r) = (self.value(a), self.value(b));
        assert_eq!(r.rows, 1);
        assert_eq!(x.cols, r.cols);
        let mut v = x.clone();
        for i in 0..v.rows {
            axpy(1.0, &r.data, v.row_mut(i));
        }
        self.push(v, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.map(a, |p| p * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.map(a, |p| 1.0 - p);
        self.push(v, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.map(a, |p| p.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// Multiplies row `i` of `a` by `s[i]`, where `s` is `r × 1`.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Var {
        let (x, sv) = (self.value(a), self.value(s));
        assert_eq!(sv.shape(), (x.rows, 1), "scale_rows expects an r×1 scale");
        let mut v = x.clone();
        for i in 0..v.rows {
            let f = sv.data[i];
            v.row_mut(i).iter_mut().for_each(|p| *p *= f);
        }
        self.push(v, Op::ScaleRows(a, s))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Var {
        let v = Matrix::row_vector(self.value(a).row(i).to_vec());
        self.push(v, Op::Row(a, i))
    }

    pub fn stack_rows(&mut self, rows: Vec<Var>) -> Var {
        let cols = self.value(rows[0]).cols;
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            let m = self.value(*r);
            assert_eq!(m.cols, cols);
            data.extend_from_slice(&m.data);
        }
        let n = data.len() / cols;
        self.push(Matrix::from_vec(n, cols, data), Op::StackRows(rows))
    }

    /// Row-wise softmax where row `i` only sees columns `0..=i`.
    pub fn causal_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        assert_eq!(x.rows, x.cols, "causal softmax expects a square matrix");
        let mut v = Matrix::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let row = &x.row(i)[..=i];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let out = &mut v.row_mut(i)[..=i];
            let mut sum = 0.0;
            for (o, &p) in out.iter_mut().zip(row) {
                *o = (p - max).exp();
                sum += *o;
            }
            out.iter_mut().for_each(|o| *o /= sum);
        }
        self.push(v, Op::CausalSoftmax(a))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gamma), self.value(beta));
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.rows);
        let mut out = Matrix::zeros(xv.rows, xv.cols);
        for i in 0..xv.rows {
            let (_, s) = normalize(xhat.row_mut(i));
            inv_std.push(s);
            let (xr, o) = (xhat.row(i), out.row_mut(i));
            for c in 0..xv.cols {
                o[c] = xr[c] * g.data[c] + b.data[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Row-wise inner products, giving an `r × 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape());
        let data = (0..x.rows).map(|i| dot(x.row(i), y.row(i))).collect();
        self.push(Matrix::from_vec(x.rows, 1, data), Op::RowDot(a, b))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, a: Var, c: Matrix) -> Var {
        let x = self.value(a);
        assert_eq!(x.shape(), c.shape());
        let data = x.data.iter().zip(&c.data).map(|(p, q)| p * q).collect();
        let v = Matrix::from_vec(x.rows, x.cols, data);
        self.push(v, Op::MulConst(a, c))
    }

    /// Weighted sum of binary cross-entropy terms on logits.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64], weights: &[f64]) -> Var {
        let x = self.value(logits);
        assert_eq!(x.data.len(), labels.len());
        assert_eq!(x.data.len(), weights.len());
        let mut loss = 0.0;
        for ((&z, &y), &w) in x.data.iter().zip(labels).zip(weights) {
            if w != 0.0 {
                // log(1 + e^z) - y z, computed stably.
                loss += w * (z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z);
            }
        }
        self.push(
            Matrix::from_vec(1, 1, vec![loss]),
            Op::BceLogits {
                logits,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
            },
        )
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Matrix::from_vec(1, 1, vec![s]), Op::SumAll(a))
    }

    /// Reverse pass from `output` seeded with `seed` (ones if `None`).
    /// Parameter gradients are added into `param_grads`, which must be
    /// shaped like the parameter slice (or empty to skip them).
    pub fn backward(&self, output: Var, seed: Option<Matrix>, param_grads: &mut [Matrix]) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let out_val = self.value(output);
        let seed = seed.unwrap_or_else(|| Matrix::filled(out_val.rows, out_val.cols, 1.0));
        assert_eq!(seed.shape(), out_val.shape(), "seed shape mismatch");
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    // Inputs keep their gradient for the caller.
                    grads[idx] = Some(g);
                }
                Op::Param(id) => {
                    if let Some(pg) = param_grads.get_mut(*id) {
                        pg.add_assign(&g);
                    }
                }
                Op::Gather { param, rows } => {
                    if let Some(pg) = param_grads.get_mut(*param) {
                        for (i, r) in rows.iter().enumerate() {
                            if let Some(r) = r {
                                axpy(1.0, g.row(i), pg.row_mut(*r));
                            }
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_nt(self.value(*b));
                    let gb = self.value(*a).matmul_tn(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulNT(a, b) => {
                    // c = a bᵀ: da = g b, db = gᵀ a
                    let ga = g.matmul(self.value(*b));
                    let gb = g.matmul_tn(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    let neg = scaled(&g, -1.0);
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *b, neg);
                }
                Op::Mul(a, b) => {
                    let ga = hadamard(&g, self.value(*b));
                    let gb = hadamard(&g, self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, b) => {
                    let mut gb = Matrix::zeros(1, g.cols);
                    for i in 0..g.rows {
                        axpy(1.0, g.row(i), &mut gb.data);
                    }
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, scaled(&g, *s)),
                Op::OneMinus(a) => accumulate(&mut grads, *a, scaled(&g, -1.0)),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = zip_with(&g, y, |gi, yi| gi * yi * (1.0 - yi));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = zip_with(&g, y, |gi, yi| gi * (1.0 - yi * yi));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let ga = zip_with(&g, x, |gi, xi| if xi > 0.0 { gi } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::ScaleRows(a, s) => {
                    let (x, sv) = (self.value(*a), self.value(*s));
                    let mut ga = g.clone();
                    let mut gs = Matrix::zeros(sv.rows, 1);
                    for i in 0..g.rows {
                        gs.data[i] = dot(g.row(i), x.row(i));
                        let f = sv.data[i];
                        ga.row_mut(i).iter_mut().for_each(|p| *p *= f);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *s, gs);
                }
                Op::Row(a, i) => {
                    let x = self.value(*a);
                    let mut ga = Matrix::zeros(x.rows, x.cols);
                    ga.row_mut(*i).copy_from_slice(&g.data);
                    accumulate(&mut grads, *a, ga);
                }
                Op::StackRows(rows) => {
                    let mut offset = 0;
                    for r in rows {
                        let (nr, nc) = self.value(*r).shape();
                        let part = Matrix::from_vec(nr, nc, g.data[offset..offset + nr * nc].to_vec());
                        offset += nr * nc;
                        accumulate(&mut grads, *r, part);
                    }
                }
                Op::CausalSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = Matrix::zeros(y.rows, y.cols);
                    for i in 0..y.rows {
                        let yr = &y.row(i)[..=i];
                        let gr = &g.row(i)[..=i];
                        let s = dot(yr, gr);
                        let out = &mut ga.row_mut(i)[..=i];
                        for j in 0..=i {
                            out[j] = yr[j] * (gr[j] - s);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gamma);
                    let mut gx = Matrix::zeros(xhat.rows, xhat.cols);
                    let mut gg = Matrix::zeros(1, xhat.cols);
                    let mut gbeta = Matrix::zeros(1, xhat.cols);
                    let mut dy = vec![0.0; xhat.cols];
                    for i in 0..xhat.rows {
                        let (gr, xr) = (g.row(i), xhat.row(i));
                        for c in 0..xhat.cols {
                            gg.data[c] += gr[c] * xr[c];
                            gbeta.data[c] += gr[c];
                            dy[c] = gr[c] * gv.data[c];
                        }
                        normalize_backward(xr, inv_std[i], &dy, gx.row_mut(i));
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gamma, gg);
                    accumulate(&mut grads, *beta, gbeta);
                }
                Op::RowDot(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let mut ga = Matrix::zeros(x.rows, x.cols);
                    let mut gb = Matrix::zeros(y.rows, y.cols);
                    for i in 0..x.rows {
                        axpy(g.data[i], y.row(i), ga.row_mut(i));
                        axpy(g.data[i], x.row(i), gb.row_mut(i));
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MulConst(a, c) => accumulate(&mut grads, *a, hadamard(&g, c)),
                Op::BceLogits { logits, labels, weights } => {
                    let x = self.value(*logits);
                    let up = g.data[0];
                    let data = x
                        .data
                        .iter()
                        .zip(labels)
                        .zip(weights)
                        .map(|((&z, &y), &w)| up * w * (sigmoid(z) - y))
                        .collect();
                    accumulate(&mut grads, *logits, Matrix::from_vec(x.rows, x.cols, data));
                }
                Op::SumAll(a) => {
                    let x = self.value(*a);
                    accumulate(&mut grads, *a, Matrix::filled(x.rows, x.cols, g.data[0]));
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn scaled(g: &Matrix, s: f64) -> Matrix {
    Matrix::from_vec(g.rows, g.cols, g.data.iter().map(|p| p * s).collect())
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    zip_with(a, b, |p, q| p * q)
}

fn zip_with(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    assert_eq!(a.shape(), b.shape());
    let data = a.data.iter().zip(&b.data).map(|(&p, &q)| f(p, q)).collect();
    Matrix::from_vec(a.rows, a.cols, data)
}
