//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every operation as it is executed. Operations only
//! reference earlier entries, so the record is topologically ordered by
//! construction and [`Tape::backward`] simply walks it in reverse.
//!
//! ```
//! use rcd_tensor::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Matrix::row_vector(vec![1.0, 2.0, 3.0]));
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).data(), &[2.0, 4.0, 6.0]);
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::TensorError;
use crate::matrix::Matrix;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    idx: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx
    }
}

/// The closed set of recorded operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale,
    Sigmoid,
    Tanh,
    Relu,
    Softmax,
    Concat,
    Split,
    Transpose,
    Sum,
    SumRows,
    Log,
    LayerNorm,
}

/// How the right operand of a binary elementwise op is stretched over the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// rhs is `1×C`, repeated for every row.
    Row,
    /// rhs is `R×1`, repeated for every column.
    Col,
    /// rhs is `1×1`.
    Scalar,
}

impl Broadcast {
    fn resolve(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Result<Self, TensorError> {
        if lhs == rhs {
            Ok(Broadcast::Same)
        } else if rhs == (1, 1) {
            Ok(Broadcast::Scalar)
        } else if rhs.0 == 1 && rhs.1 == lhs.1 {
            Ok(Broadcast::Row)
        } else if rhs.1 == 1 && rhs.0 == lhs.0 {
            Ok(Broadcast::Col)
        } else {
            Err(TensorError::shape(op, lhs, rhs))
        }
    }

    #[inline]
    fn index(self, r: usize, c: usize, rhs_cols: usize) -> usize {
        match self {
            Broadcast::Same => r * rhs_cols + c,
            Broadcast::Row => c,
            Broadcast::Col => r,
            Broadcast::Scalar => 0,
        }
    }

    /// Sums a full-size gradient back down to the rhs shape.
    fn reduce(self, grad: &Matrix, rhs_shape: (usize, usize)) -> Matrix {
        if self == Broadcast::Same {
            return grad.clone();
        }
        let mut out = Matrix::zeros(rhs_shape.0, rhs_shape.1);
        for r in 0..grad.rows() {
            for c in 0..grad.cols() {
                let i = self.index(r, c, rhs_shape.1);
                out.data_mut()[i] += grad.get(r, c);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize, Broadcast),
    Sub(usize, usize, Broadcast),
    Mul(usize, usize, Broadcast),
    Scale(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Softmax {
        input: usize,
        segments: Vec<(usize, usize)>,
    },
    Concat(Vec<usize>),
    Split {
        input: usize,
        start: usize,
    },
    Transpose(usize),
    Sum(usize),
    SumRows(usize),
    Log {
        input: usize,
        floor: f64,
    },
    LayerNorm {
        input: usize,
        gain: usize,
        bias: usize,
        normalized: Matrix,
        inv_std: Vec<f64>,
    },
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Relu(_) => OpKind::Relu,
            Op::Softmax { .. } => OpKind::Softmax,
            Op::Concat(_) => OpKind::Concat,
            Op::Split { .. } => OpKind::Split,
            Op::Transpose(_) => OpKind::Transpose,
            Op::Sum(_) => OpKind::Sum,
            Op::SumRows(_) => OpKind::SumRows,
            Op::Log { .. } => OpKind::Log,
            Op::LayerNorm { .. } => OpKind::LayerNorm,
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Append-only record of executed operations.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable leaf; it receives a gradient on backward.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, true)
    }

    /// Records a constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Matrix, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    pub fn value(&self, v: Var) -> &Matrix {
        assert_eq!(v.tape, self.id, "variable does not belong to this tape");
        &self.nodes[v.idx].value
    }

    pub fn op_kind(&self, v: Var) -> OpKind {
        self.nodes[self.check(v).expect("foreign variable")].op.kind()
    }

    fn check(&self, v: Var) -> Result<usize, TensorError> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(TensorError::ForeignVar);
        }
        Ok(v.idx)
    }

    fn push(&mut self, value: Matrix, op: Op, inputs: &[usize]) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name(op.kind()) });
        }
        let needs_grad = inputs.iter().any(|&i| self.nodes[i].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let value = self.nodes[ia].value.matmul(&self.nodes[ib].value)?;
        self.push(value, Op::MatMul(ia, ib), &[ia, ib])
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Matrix, usize, usize, Broadcast), TensorError> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (lhs, rhs) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let bc = Broadcast::resolve(name, lhs.shape(), rhs.shape())?;
        let mut out = Matrix::zeros(lhs.rows(), lhs.cols());
        let rc = rhs.cols();
        for r in 0..lhs.rows() {
            for c in 0..lhs.cols() {
                let v = f(lhs.get(r, c), rhs.data()[bc.index(r, c, rc)]);
                out.set(r, c, v);
            }
        }
        Ok((out, ia, ib, bc))
    }

    /// `a + b`; `b` may be `1×C`, `R×1` or `1×1` and is broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (v, ia, ib, bc) = self.elementwise("add", a, b, |x, y| x + y)?;
        self.push(v, Op::Add(ia, ib, bc), &[ia, ib])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (v, ia, ib, bc) = self.elementwise("sub", a, b, |x, y| x - y)?;
        self.push(v, Op::Sub(ia, ib, bc), &[ia, ib])
    }

    /// Elementwise (Hadamard) product with the same broadcasting as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (v, ia, ib, bc) = self.elementwise("mul", a, b, |x, y| x * y)?;
        self.push(v, Op::Mul(ia, ib, bc), &[ia, ib])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let v = self.nodes[ia].value.map(|x| x * factor);
        self.push(v, Op::Scale(ia, factor), &[ia])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let v = self.nodes[ia].value.map(sigmoid);
        self.push(v, Op::Sigmoid(ia), &[ia])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let v = self.nodes[ia].value.map(f64::tanh);
        self.push(v, Op::Tanh(ia), &[ia])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let v = self.nodes[ia].value.map(|x| x.max(0.0));
        self.push(v, Op::Relu(ia), &[ia])
    }

    /// Softmax over a row or column vector.
    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let n = self.nodes[ia].value.len();
        self.softmax_segments(a, &[(0, n)])
    }

    /// Independent softmaxes over contiguous `(start, len)` runs of a vector.
    ///
    /// Entries outside every segment are set to zero. Uses max subtraction,
    /// so adding a constant to one segment's logits leaves its output unchanged.
    pub fn softmax_segments(&mut self, a: Var, segments: &[(usize, usize)]) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let x = &self.nodes[ia].value;
        if x.rows() != 1 && x.cols() != 1 {
            return Err(TensorError::invalid(
                "softmax",
                format!("expected a vector, got {:?}", x.shape()),
            ));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for &(start, len) in segments {
            if len == 0 || start + len > x.len() {
                return Err(TensorError::invalid("softmax", format!("bad segment ({start}, {len})")));
            }
            let seg = &x.data()[start..start + len];
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = seg.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for (o, e) in out.data_mut()[start..start + len].iter_mut().zip(&exps) {
                *o = e / total;
            }
        }
        self.push(
            out,
            Op::Softmax {
                input: ia,
                segments: segments.to_vec(),
            },
            &[ia],
        )
    }

    /// Concatenates along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let idx: Vec<usize> = parts.iter().map(|&p| self.check(p)).collect::<Result<_, _>>()?;
        let Some(&first) = idx.first() else {
            return Err(TensorError::invalid("concat", "no inputs"));
        };
        let rows = self.nodes[first].value.rows();
        let mut cols = 0;
        for &i in &idx {
            let s = self.nodes[i].value.shape();
            if s.0 != rows {
                return Err(TensorError::shape("concat", self.nodes[first].value.shape(), s));
            }
            cols += s.1;
        }
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &i in &idx {
                let part = self.nodes[i].value.row(r);
                out.row_mut(r)[offset..offset + part.len()].copy_from_slice(part);
                offset += part.len();
            }
        }
        self.push(out, Op::Concat(idx.clone()), &idx)
    }

    /// Column slice `[start, start + len)` of `a`.
    pub fn split(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let x = &self.nodes[ia].value;
        if start + len > x.cols() || len == 0 {
            return Err(TensorError::invalid(
                "split",
                format!("columns [{start}, {}) out of range for {:?}", start + len, x.shape()),
            ));
        }
        let mut out = Matrix::zeros(x.rows(), len);
        for r in 0..x.rows() {
            out.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
        }
        self.push(out, Op::Split { input: ia, start }, &[ia])
    }

    /// Splits the last axis into `parts` equal slices.
    pub fn split_even(&mut self, a: Var, parts: usize) -> Result<Vec<Var>, TensorError> {
        let cols = self.nodes[self.check(a)?].value.cols();
        if parts == 0 || !cols.is_multiple_of(parts) {
            return Err(TensorError::invalid(
                "split",
                format!("{parts} parts do not divide {cols} columns"),
            ));
        }
        let width = cols / parts;
        (0..parts).map(|p| self.split(a, p * width, width)).collect()
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let v = self.nodes[ia].value.transpose();
        self.push(v, Op::Transpose(ia), &[ia])
    }

    /// Sum of all entries as a `1×1` value.
    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let v = Matrix::scalar(self.nodes[ia].value.sum());
        self.push(v, Op::Sum(ia), &[ia])
    }

    /// Sums along the last axis: `R×C → R×1`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let x = &self.nodes[ia].value;
        let v = Matrix::column_vector((0..x.rows()).map(|r| x.row(r).iter().sum()).collect());
        self.push(v, Op::SumRows(ia), &[ia])
    }

    /// Natural log of `max(a, floor)`; entries at or below the floor get zero gradient.
    pub fn log(&mut self, a: Var, floor: f64) -> Result<Var, TensorError> {
        let ia = self.check(a)?;
        let v = self.nodes[ia].value.map(|x| x.max(floor).ln());
        self.push(v, Op::Log { input: ia, floor }, &[ia])
    }

    /// Per-row layer normalization with a learned `1×C` gain and bias.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var, eps: f64) -> Result<Var, TensorError> {
        let (ia, ig, ib) = (self.check(a)?, self.check(gain)?, self.check(bias)?);
        let x = &self.nodes[ia].value;
        let (rows, cols) = x.shape();
        for i in [ig, ib] {
            let s = self.nodes[i].value.shape();
            if s != (1, cols) {
                return Err(TensorError::shape("layer_norm", x.shape(), s));
            }
        }
        let g = self.nodes[ig].value.data();
        let b = self.nodes[ib].value.data();
        let mut normalized = Matrix::zeros(rows, cols);
        let mut out = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std.push(inv);
            for c in 0..cols {
                let xh = (row[c] - mean) * inv;
                normalized.set(r, c, xh);
                out.set(r, c, xh * g[c] + b[c]);
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                input: ia,
                gain: ig,
                bias: ib,
                normalized,
                inv_std,
            },
            &[ia, ig, ib],
        )
    }

    /// Reverse pass from a `1×1` loss.
    ///
    /// Leaves the loss does not depend on get zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let li = self.check(loss)?;
        let shape = self.nodes[li].value.shape();
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; li + 1];
        grads[li] = Some(Matrix::scalar(1.0));

        for idx in (0..=li).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            tape: self.id,
            grads,
            shapes,
        })
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let val = |i: usize| &self.nodes[i].value;
        let mut acc = |i: usize, delta: Matrix| {
            if !self.nodes[i].needs_grad {
                return;
            }
            match &mut grads[i] {
                Some(existing) => existing.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[*a].needs_grad {
                    acc(*a, g.matmul(&val(*b).transpose()).expect("matmul grad shape"));
                }
                if self.nodes[*b].needs_grad {
                    acc(*b, val(*a).transpose().matmul(g).expect("matmul grad shape"));
                }
            }
            Op::Add(a, b, bc) => {
                acc(*a, g.clone());
                if self.nodes[*b].needs_grad {
                    acc(*b, bc.reduce(g, val(*b).shape()));
                }
            }
            Op::Sub(a, b, bc) => {
                acc(*a, g.clone());
                if self.nodes[*b].needs_grad {
                    acc(*b, bc.reduce(&g.map(|v| -v), val(*b).shape()));
                }
            }
            Op::Mul(a, b, bc) => {
                let (x, y) = (val(*a), val(*b));
                let rc = y.cols();
                if self.nodes[*a].needs_grad {
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        for c in 0..ga.cols() {
                            let v = ga.get(r, c) * y.data()[bc.index(r, c, rc)];
                            ga.set(r, c, v);
                        }
                    }
                    acc(*a, ga);
                }
                if self.nodes[*b].needs_grad {
                    let mut full = g.clone();
                    for (f, xv) in full.data_mut().iter_mut().zip(x.data()) {
                        *f *= xv;
                    }
                    acc(*b, bc.reduce(&full, y.shape()));
                }
            }
            Op::Scale(a, factor) => acc(*a, g.map(|v| v * factor)),
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                for (dv, y) in d.data_mut().iter_mut().zip(node.value.data()) {
                    *dv *= y * (1.0 - y);
                }
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                for (dv, y) in d.data_mut().iter_mut().zip(node.value.data()) {
                    *dv *= 1.0 - y * y;
                }
                acc(*a, d);
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                for (dv, x) in d.data_mut().iter_mut().zip(val(*a).data()) {
                    if *x <= 0.0 {
                        *dv = 0.0;
                    }
                }
                acc(*a, d);
            }
            Op::Softmax { input, segments } => {
                let y = node.value.data();
                let mut d = Matrix::zeros(g.rows(), g.cols());
                for &(start, len) in segments {
                    let range = start..start + len;
                    let dot: f64 = y[range.clone()]
                        .iter()
                        .zip(&g.data()[range.clone()])
                        .map(|(a, b)| a * b)
                        .sum();
                    for i in range {
                        d.data_mut()[i] = y[i] * (g.data()[i] - dot);
                    }
                }
                acc(*input, d);
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = val(p).cols();
                    if self.nodes[p].needs_grad {
                        let mut d = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            d.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        acc(p, d);
                    }
                    offset += w;
                }
            }
            Op::Split { input, start } => {
                let x = val(*input);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for r in 0..g.rows() {
                    d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                acc(*input, d);
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Sum(a) => {
                let s = val(*a).shape();
                acc(*a, Matrix::filled(s.0, s.1, g.data()[0]));
            }
            Op::SumRows(a) => {
                let x = val(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let gr = g.data()[r];
                    d.row_mut(r).fill(gr);
                }
                acc(*a, d);
            }
            Op::Log { input, floor } => {
                let mut d = g.clone();
                for (dv, x) in d.data_mut().iter_mut().zip(val(*input).data()) {
                    *dv = if *x > *floor { *dv / x } else { 0.0 };
                }
                acc(*input, d);
            }
            Op::LayerNorm {
                input,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let (rows, cols) = normalized.shape();
                let gvec = val(*gain).data();
                let mut dx = Matrix::zeros(rows, cols);
                let mut dgain = Matrix::zeros(1, cols);
                let mut dbias = Matrix::zeros(1, cols);
                for (r, &inv) in inv_std.iter().enumerate().take(rows) {
                    let gr = g.row(r);
                    let xh = normalized.row(r);
                    let mut sum_d = 0.0;
                    let mut sum_dx = 0.0;
                    for c in 0..cols {
                        let dxh = gr[c] * gvec[c];
                        sum_d += dxh;
                        sum_dx += dxh * xh[c];
                        dgain.data_mut()[c] += gr[c] * xh[c];
                        dbias.data_mut()[c] += gr[c];
                    }
                    let n = cols as f64;
                    for c in 0..cols {
                        let dxh = gr[c] * gvec[c];
                        dx.set(r, c, inv / n * (n * dxh - sum_d - xh[c] * sum_dx));
                    }
                }
                acc(*input, dx);
                acc(*gain, dgain);
                acc(*bias, dbias);
            }
        }
    }
}

fn op_name(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Leaf => "leaf",
        OpKind::MatMul => "matmul",
        OpKind::Add => "add",
        OpKind::Sub => "sub",
        OpKind::Mul => "mul",
        OpKind::Scale => "scale",
        OpKind::Sigmoid => "sigmoid",
        OpKind::Tanh => "tanh",
        OpKind::Relu => "relu",
        OpKind::Softmax => "softmax",
        OpKind::Concat => "concat",
        OpKind::Split => "split",
        OpKind::Transpose => "transpose",
        OpKind::Sum => "sum",
        OpKind::SumRows => "sum_rows",
        OpKind::Log => "log",
        OpKind::LayerNorm => "layer_norm",
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Matrix {
        assert_eq!(v.tape, self.tape, "variable does not belong to this tape");
        match &self.grads[v.idx] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.idx];
                Matrix::zeros(r, c)
            }
        }
    }
}
