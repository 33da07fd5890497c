//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s in execution order, so the
//! recording order is already a topological order and [`Tape::backward`] is a single
//! reverse sweep. A tape built with [`Tape::no_grad`] records nothing and lets
//! intermediate buffers drop as soon as their `Var` does.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

use super::dense::{gemm, Tensor};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// `tanh` through one `exp`; absolute error near 1e-16, which is all GELU needs since
/// it only ever uses `1 + t` and `1 - t^2`.
#[inline]
fn tanh_abs(u: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

/// GELU, tanh form: `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + tanh_abs(GELU_C * (x + GELU_A * x * x * x)))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    gelu_and_grad(x).1
}

/// `(gelu(x), gelu'(x))` sharing one `tanh`.
#[inline]
pub fn gelu_and_grad(x: f64) -> (f64, f64) {
    let t = tanh_abs(GELU_C * (x + GELU_A * x * x * x));
    let grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    (0.5 * x * (1.0 + t), grad)
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Scale(usize, f64),
    Transpose(usize),
    Reshape(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols { a: usize, start: usize },
    SliceRows { a: usize, start: usize },
    GatherRows { a: usize, index: Vec<usize> },
    Softmax(usize),
    LayerNorm { a: usize, xhat: Vec<f64>, inv_std: Vec<f64> },
    Gelu(usize),
    L2Normalize { a: usize, norms: Vec<f64>, eps: f64 },
    L1 { a: usize, target: Tensor },
    CrossEntropy { a: usize, targets: Vec<usize>, probs: Vec<f64> },
    Bce { a: usize, target: Tensor },
    Sum(usize),
    PairMlp { a: usize, b: usize, w: usize, bias: usize },
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
}

/// Operation recorder. Confined to one thread.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    record: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// A value flowing through a tape.
#[derive(Clone)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: Option<usize>,
    value: Rc<Tensor>,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.value.shape())
            .finish()
    }
}

/// Gradients produced by [`Tape::backward`]. Only leaf gradients are retained.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: &Var<'_>) -> Option<&Tensor> {
        var.id.and_then(|id| self.grads.get(id)).and_then(Option::as_ref)
    }

    /// Gradient for `var`, or zeros of its shape when it did not influence the output.
    pub fn get_or_zeros(&self, var: &Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.value.shape()))
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            record: true,
        }
    }

    /// A tape that evaluates without recording; `backward` on it yields no gradients.
    pub fn no_grad() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            record: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.record
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, || Op::Leaf)
    }

    pub fn leaf_rc(&self, value: Rc<Tensor>) -> Var<'_> {
        self.push_rc(value, || Op::Leaf)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.leaf(Tensor::scalar(value))
    }

    fn push(&self, value: Tensor, op: impl FnOnce() -> Op) -> Var<'_> {
        self.push_rc(Rc::new(value), op)
    }

    fn push_rc(&self, value: Rc<Tensor>, op: impl FnOnce() -> Op) -> Var<'_> {
        let id = if self.record {
            let mut nodes = self.nodes.borrow_mut();
            nodes.push(Node {
                value: Rc::clone(&value),
                op: op(),
            });
            Some(nodes.len() - 1)
        } else {
            None
        };
        Var {
            tape: self,
            id,
            value,
        }
    }

    /// Back-propagate from a scalar output.
    pub fn backward(&self, output: &Var<'_>) -> Gradients {
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        let Some(root) = output.id else {
            return Gradients { grads };
        };
        grads[root] = Some(Tensor::filled(output.value.shape(), 1.0));

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            let node = &nodes[id];
            let val = |i: usize| -> &Tensor { &nodes[i].value };
            let mut contrib: Vec<(usize, Tensor)> = Vec::with_capacity(2);
            let mut acc = |i: usize, t: Tensor| contrib.push((i, t));
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, bv.data(), true, &mut da, 0.0);
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, av.data(), true, g.data(), false, &mut db, 0.0);
                    acc(*a, Tensor::from_parts(av.shape().to_vec(), da));
                    acc(*b, Tensor::from_parts(bv.shape().to_vec(), db));
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|v| -v));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let da = zip_map(&g, bv, |g, b| g * b);
                    let db = zip_map(&g, av, |g, a| g * a);
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::AddRow(a, row) => {
                    let c = g.cols();
                    let mut dr = vec![0.0; c];
                    for r in g.data().chunks(c) {
                        for (d, v) in dr.iter_mut().zip(r) {
                            *d += v;
                        }
                    }
                    acc(*row, Tensor::from_parts(val(*row).shape().to_vec(), dr));
                    acc(*a, g);
                }
                Op::MulRow(a, row) => {
                    let (av, rv) = (val(*a), val(*row));
                    let c = g.cols();
                    let mut dr = vec![0.0; c];
                    let mut da = vec![0.0; g.numel()];
                    for ((gr, ar), dar) in g
                        .data()
                        .chunks(c)
                        .zip(av.data().chunks(c))
                        .zip(da.chunks_mut(c))
                    {
                        for k in 0..c {
                            dr[k] += gr[k] * ar[k];
                            dar[k] = gr[k] * rv.data()[k];
                        }
                    }
                    acc(*row, Tensor::from_parts(rv.shape().to_vec(), dr));
                    acc(*a, Tensor::from_parts(av.shape().to_vec(), da));
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    acc(*a, g.map(|v| v * s));
                }
                Op::Transpose(a) => acc(*a, g.transpose2()),
                Op::Reshape(a) => {
                    let shape = val(*a).shape().to_vec();
                    acc(*a, Tensor::from_parts(shape, g.into_data()));
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let pv = val(p);
                        let w = pv.cols();
                        let mut d = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            d.extend_from_slice(&g.data()[r * total + offset..r * total + offset + w]);
                        }
                        acc(p, Tensor::from_parts(pv.shape().to_vec(), d));
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pv = val(p);
                        let n = pv.numel();
                        acc(
                            p,
                            Tensor::from_parts(pv.shape().to_vec(), g.data()[offset..offset + n].to_vec()),
                        );
                        offset += n;
                    }
                }
                Op::SliceCols { a, start } => {
                    let av = val(*a);
                    let (rows, cols, w) = (av.rows(), av.cols(), g.cols());
                    let mut d = vec![0.0; rows * cols];
                    for r in 0..rows {
                        d[r * cols + start..r * cols + start + w].copy_from_slice(g.row(r));
                    }
                    acc(*a, Tensor::from_parts(av.shape().to_vec(), d));
                }
                Op::SliceRows { a, start } => {
                    let av = val(*a);
                    let c = av.cols();
                    let mut d = vec![0.0; av.numel()];
                    d[start * c..start * c + g.numel()].copy_from_slice(g.data());
                    acc(*a, Tensor::from_parts(av.shape().to_vec(), d));
                }
                Op::GatherRows { a, index } => {
                    let av = val(*a);
                    let c = av.cols();
                    let mut d = vec![0.0; av.numel()];
                    for (k, &src) in index.iter().enumerate() {
                        for (dst, v) in d[src * c..(src + 1) * c].iter_mut().zip(g.row(k)) {
                            *dst += v;
                        }
                    }
                    acc(*a, Tensor::from_parts(av.shape().to_vec(), d));
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut d = vec![0.0; y.numel()];
                    for ((yr, gr), dr) in y.data().chunks(c).zip(g.data().chunks(c)).zip(d.chunks_mut(c)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for k in 0..c {
                            dr[k] = yr[k] * (gr[k] - dot);
                        }
                    }
                    acc(*a, Tensor::from_parts(y.shape().to_vec(), d));
                }
                Op::LayerNorm { a, xhat, inv_std } => {
                    let c = g.cols();
                    let mut d = vec![0.0; g.numel()];
                    for (r, ((gr, xr), dr)) in g
                        .data()
                        .chunks(c)
                        .zip(xhat.chunks(c))
                        .zip(d.chunks_mut(c))
                        .enumerate()
                    {
                        let mg = gr.iter().sum::<f64>() / c as f64;
                        let mgx = gr.iter().zip(xr).map(|(g, x)| g * x).sum::<f64>() / c as f64;
                        for k in 0..c {
                            dr[k] = inv_std[r] * (gr[k] - mg - xr[k] * mgx);
                        }
                    }
                    acc(*a, Tensor::from_parts(g.shape().to_vec(), d));
                }
                Op::Gelu(a) => {
                    let d = zip_map(&g, val(*a), |g, x| g * gelu_grad(x));
                    acc(*a, d);
                }
                Op::L2Normalize { a, norms, eps } => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut d = vec![0.0; y.numel()];
                    for (r, ((yr, gr), dr)) in y
                        .data()
                        .chunks(c)
                        .zip(g.data().chunks(c))
                        .zip(d.chunks_mut(c))
                        .enumerate()
                    {
                        if norms[r] > *eps {
                            let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                            for k in 0..c {
                                dr[k] = (gr[k] - yr[k] * dot) / norms[r];
                            }
                        } else {
                            for k in 0..c {
                                dr[k] = gr[k] / eps;
                            }
                        }
                    }
                    acc(*a, Tensor::from_parts(y.shape().to_vec(), d));
                }
                Op::L1 { a, target } => {
                    let av = val(*a);
                    let s = g.item() / av.rows().max(1) as f64;
                    let d = zip_map(av, target, |x, t| s * sign(x - t));
                    acc(*a, d);
                }
                Op::CrossEntropy { a, targets, probs } => {
                    let av = val(*a);
                    let c = av.cols();
                    let s = g.item() / targets.len().max(1) as f64;
                    let mut d: Vec<f64> = probs.iter().map(|p| p * s).collect();
                    for (r, &t) in targets.iter().enumerate() {
                        d[r * c + t] -= s;
                    }
                    acc(*a, Tensor::from_parts(av.shape().to_vec(), d));
                }
                Op::Bce { a, target } => {
                    let av = val(*a);
                    let s = g.item() / av.numel().max(1) as f64;
                    let d = zip_map(av, target, |x, t| s * (sigmoid(x) - t));
                    acc(*a, d);
                }
                Op::Sum(a) => {
                    let av = val(*a);
                    acc(*a, Tensor::filled(av.shape(), g.item()));
                }
                Op::PairMlp { a, b, w, bias } => {
                    let (av, bv, wv) = (val(*a), val(*b), val(*w));
                    let (n, m, h) = (av.rows(), bv.rows(), av.cols());
                    let mut da = vec![0.0; n * h];
                    let mut db = vec![0.0; m * h];
                    let mut dw = vec![0.0; h];
                    let mut dbias = 0.0;
                    let wd = wv.data();
                    for j in 0..n {
                        let ar = av.row(j);
                        let dar = &mut da[j * h..(j + 1) * h];
                        for i in 0..m {
                            let gji = g.data()[j * m + i];
                            if gji == 0.0 {
                                continue;
                            }
                            dbias += gji;
                            let br = bv.row(i);
                            let dbr = &mut db[i * h..(i + 1) * h];
                            for k in 0..h {
                                let z = ar[k] + br[k];
                                let (gz, dz) = gelu_and_grad(z);
                                let gp = gji * wd[k] * dz;
                                dar[k] += gp;
                                dbr[k] += gp;
                                dw[k] += gji * gz;
                            }
                        }
                    }
                    acc(*a, Tensor::from_parts(av.shape().to_vec(), da));
                    acc(*b, Tensor::from_parts(bv.shape().to_vec(), db));
                    acc(*w, Tensor::from_parts(wv.shape().to_vec(), dw));
                    acc(*bias, Tensor::from_parts(val(*bias).shape().to_vec(), vec![dbias]));
                }
            }
            for (i, t) in contrib {
                match &mut grads[i] {
                    Some(existing) => existing.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            }
        }
        Gradients { grads }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> Option<usize> {
        self.id
    }

    fn unary(&self, value: Tensor, op: impl FnOnce(usize) -> Op) -> Var<'t> {
        let id = self.id;
        self.tape.push(value, || op(id.expect("recording tape yields ids")))
    }

    fn binary(&self, other: &Var<'t>, value: Tensor, op: impl FnOnce(usize, usize) -> Op) -> Var<'t> {
        let (a, b) = (self.id, other.id);
        self.tape.push(value, || {
            op(a.expect("recording tape yields ids"), b.expect("recording tape yields ids"))
        })
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (&*self.value, &*other.value);
        if a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows() {
            return Err(shape_err("matmul", a, b));
        }
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, a.data(), false, b.data(), false, &mut out, 0.0);
        Ok(self.binary(other, Tensor::from_parts(vec![m, n], out), Op::MatMul))
    }

    fn elementwise(
        &self,
        other: &Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: impl FnOnce(usize, usize) -> Op,
    ) -> Result<Var<'t>> {
        if self.value.shape() != other.value.shape() {
            return Err(shape_err(name, &self.value, &other.value));
        }
        let v = zip_map(&self.value, &other.value, f);
        Ok(self.binary(other, v, op))
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.elementwise(other, "add", |a, b| a + b, Op::Add)
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.elementwise(other, "sub", |a, b| a - b, Op::Sub)
    }

    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.elementwise(other, "mul", |a, b| a * b, Op::Mul)
    }

    /// Adds a length-`c` vector to every row of an `[r, c]` tensor.
    pub fn add_row(&self, row: &Var<'t>) -> Result<Var<'t>> {
        let (a, r) = (&*self.value, &*row.value);
        if r.numel() != a.cols() || a.rank() != 2 {
            return Err(shape_err("add_row", a, r));
        }
        let c = a.cols();
        let mut out = a.data().to_vec();
        for chunk in out.chunks_mut(c) {
            for (o, v) in chunk.iter_mut().zip(r.data()) {
                *o += v;
            }
        }
        Ok(self.binary(row, Tensor::from_parts(a.shape().to_vec(), out), Op::AddRow))
    }

    /// Multiplies every row of an `[r, c]` tensor element-wise by a length-`c` vector.
    pub fn mul_row(&self, row: &Var<'t>) -> Result<Var<'t>> {
        let (a, r) = (&*self.value, &*row.value);
        if r.numel() != a.cols() || a.rank() != 2 {
            return Err(shape_err("mul_row", a, r));
        }
        let c = a.cols();
        let mut out = a.data().to_vec();
        for chunk in out.chunks_mut(c) {
            for (o, v) in chunk.iter_mut().zip(r.data()) {
                *o *= v;
            }
        }
        Ok(self.binary(row, Tensor::from_parts(a.shape().to_vec(), out), Op::MulRow))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        self.unary(self.value.map(|v| v * s), |a| Op::Scale(a, s))
    }

    pub fn transpose(&self) -> Var<'t> {
        self.unary(self.value.transpose2(), Op::Transpose)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let v = (*self.value).clone().reshape(shape)?;
        Ok(self.unary(v, Op::Reshape))
    }

    /// Concatenate rank-2 tensors. `axis` 0 stacks rows, 1 stacks columns.
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        let tape = first.tape;
        let ids = || parts.iter().map(|p| p.id.expect("recording tape yields ids")).collect();
        match axis {
            0 => {
                let c = first.value.cols();
                let mut data = Vec::new();
                let mut rows = 0;
                for p in parts {
                    if p.value.cols() != c || p.value.rank() != 2 {
                        return Err(shape_err("concat", &first.value, &p.value));
                    }
                    rows += p.value.rows();
                    data.extend_from_slice(p.value.data());
                }
                Ok(tape.push(Tensor::from_parts(vec![rows, c], data), || Op::ConcatRows(ids())))
            }
            1 => {
                let r = first.value.rows();
                for p in parts {
                    if p.value.rows() != r || p.value.rank() != 2 {
                        return Err(shape_err("concat", &first.value, &p.value));
                    }
                }
                let total: usize = parts.iter().map(|p| p.value.cols()).sum();
                let mut data = Vec::with_capacity(r * total);
                for i in 0..r {
                    for p in parts {
                        data.extend_from_slice(p.value.row(i));
                    }
                }
                Ok(tape.push(Tensor::from_parts(vec![r, total], data), || Op::ConcatCols(ids())))
            }
            _ => Err(Error::invalid(format!("concat axis {axis} unsupported for rank-2 tensors"))),
        }
    }

    /// Columns `[start, start + len)` of a rank-2 tensor.
    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Var<'t>> {
        let a = &*self.value;
        if a.rank() != 2 || start + len > a.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: a.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let mut data = Vec::with_capacity(a.rows() * len);
        for r in 0..a.rows() {
            data.extend_from_slice(&a.row(r)[start..start + len]);
        }
        Ok(self.unary(Tensor::from_parts(vec![a.rows(), len], data), |a| Op::SliceCols {
            a,
            start,
        }))
    }

    /// Rows `[start, start + len)` of a rank-2 tensor.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Var<'t>> {
        let a = &*self.value;
        if a.rank() != 2 || start + len > a.rows() {
            return Err(Error::Shape {
                op: "slice_rows",
                lhs: a.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let c = a.cols();
        let data = a.data()[start * c..(start + len) * c].to_vec();
        Ok(self.unary(Tensor::from_parts(vec![len, c], data), |a| Op::SliceRows {
            a,
            start,
        }))
    }

    /// Row gather; indices may repeat.
    pub fn gather_rows(&self, index: &[usize]) -> Result<Var<'t>> {
        let a = &*self.value;
        if a.rank() != 2 {
            return Err(Error::Shape {
                op: "gather_rows",
                lhs: a.shape().to_vec(),
                rhs: vec![index.len()],
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= a.rows()) {
            return Err(Error::Shape {
                op: "gather_rows",
                lhs: a.shape().to_vec(),
                rhs: vec![bad],
            });
        }
        let c = a.cols();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            data.extend_from_slice(a.row(i));
        }
        let index = index.to_vec();
        Ok(self.unary(Tensor::from_parts(vec![index.len(), c], data), |a| {
            Op::GatherRows { a, index }
        }))
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&self) -> Var<'t> {
        let a = &*self.value;
        let c = a.cols();
        let mut out = a.data().to_vec();
        for row in out.chunks_mut(c) {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        self.unary(Tensor::from_parts(a.shape().to_vec(), out), Op::Softmax)
    }

    /// Normalizes each row to zero mean and unit variance (no affine part).
    pub fn layer_norm(&self, eps: f64) -> Var<'t> {
        let a = &*self.value;
        let c = a.cols();
        let mut xhat = a.data().to_vec();
        let mut inv_std = Vec::with_capacity(a.rows());
        for row in xhat.chunks_mut(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * is;
            }
            inv_std.push(is);
        }
        let value = Tensor::from_parts(a.shape().to_vec(), xhat.clone());
        let id = self.id;
        self.tape.push(value, move || Op::LayerNorm {
            a: id.expect("recording tape yields ids"),
            xhat,
            inv_std,
        })
    }

    pub fn gelu(&self) -> Var<'t> {
        self.unary(self.value.map(gelu), Op::Gelu)
    }

    /// Divides each row by `max(||row||, eps)`.
    pub fn l2_normalize(&self, eps: f64) -> Result<Var<'t>> {
        if eps <= 0.0 {
            return Err(Error::invalid("l2_normalize epsilon must be positive"));
        }
        let a = &*self.value;
        let c = a.cols();
        let mut out = a.data().to_vec();
        let mut norms = Vec::with_capacity(a.rows());
        for row in out.chunks_mut(c) {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d = n.max(eps);
            for v in row.iter_mut() {
                *v /= d;
            }
            norms.push(n);
        }
        let id = self.id;
        Ok(self.tape.push(Tensor::from_parts(a.shape().to_vec(), out), move || {
            Op::L2Normalize {
                a: id.expect("recording tape yields ids"),
                norms,
                eps,
            }
        }))
    }

    /// Mean over rows of the per-row L1 distance to `target`.
    pub fn l1_loss(&self, target: &Tensor) -> Result<Var<'t>> {
        let a = &*self.value;
        if a.shape() != target.shape() {
            return Err(shape_err("l1_loss", a, target));
        }
        let s: f64 = a.data().iter().zip(target.data()).map(|(x, t)| (x - t).abs()).sum();
        let v = s / a.rows().max(1) as f64;
        let target = target.clone();
        Ok(self.unary(Tensor::scalar(v), |a| Op::L1 { a, target }))
    }

    /// Mean over rows of `-log softmax(row)[target]`.
    pub fn cross_entropy(&self, targets: &[usize]) -> Result<Var<'t>> {
        let a = &*self.value;
        let c = a.cols();
        if a.rank() != 2 || targets.len() != a.rows() || targets.iter().any(|&t| t >= c) {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: a.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let mut probs = a.data().to_vec();
        let mut total = 0.0;
        for (row, &t) in probs.chunks_mut(c).zip(targets) {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            total += lse - row[t];
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        let v = total / targets.len().max(1) as f64;
        let targets = targets.to_vec();
        Ok(self.unary(Tensor::scalar(v), |a| Op::CrossEntropy { a, targets, probs }))
    }

    /// Mean binary cross-entropy of logits against targets in `[0, 1]`.
    pub fn binary_cross_entropy(&self, target: &Tensor) -> Result<Var<'t>> {
        let a = &*self.value;
        if a.shape() != target.shape() {
            return Err(shape_err("binary_cross_entropy", a, target));
        }
        // max(x,0) - x t + log(1 + exp(-|x|))
        let s: f64 = a
            .data()
            .iter()
            .zip(target.data())
            .map(|(&x, &t)| x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
            .sum();
        let v = s / a.numel().max(1) as f64;
        let target = target.clone();
        Ok(self.unary(Tensor::scalar(v), |a| Op::Bce { a, target }))
    }

    pub fn sum(&self) -> Var<'t> {
        let s = self.value.data().iter().sum();
        self.unary(Tensor::scalar(s), Op::Sum)
    }

    pub fn mean(&self) -> Var<'t> {
        let n = self.value.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Fused pairwise head: `out[j, i] = sum_k w[k] gelu(a[j, k] + b[i, k]) + bias`.
    ///
    /// Equivalent to an MLP with one hidden layer on the concatenation of row `j` of the
    /// first operand and row `i` of the second, once their first-layer projections are
    /// taken, but never materializes the `[n * m, h]` hidden activations.
    pub fn pair_mlp(&self, b: &Var<'t>, w: &Var<'t>, bias: &Var<'t>) -> Result<Var<'t>> {
        let (av, bv, wv) = (&*self.value, &*b.value, &*w.value);
        let h = av.cols();
        if av.rank() != 2 || bv.rank() != 2 || bv.cols() != h || wv.numel() != h {
            return Err(shape_err("pair_mlp", av, bv));
        }
        if bias.value.numel() != 1 {
            return Err(shape_err("pair_mlp", wv, &bias.value));
        }
        let (n, m) = (av.rows(), bv.rows());
        let bias_v = bias.value.item();
        let wd = wv.data();
        let mut out = vec![0.0; n * m];
        for j in 0..n {
            let ar = av.row(j);
            for i in 0..m {
                let br = bv.row(i);
                let mut s = 0.0;
                for k in 0..h {
                    s += wd[k] * gelu(ar[k] + br[k]);
                }
                out[j * m + i] = s + bias_v;
            }
        }
        let ids = (self.id, b.id, w.id, bias.id);
        Ok(self.tape.push(Tensor::from_parts(vec![n, m], out), || {
            let e = "recording tape yields ids";
            Op::PairMlp {
                a: ids.0.expect(e),
                b: ids.1.expect(e),
                w: ids.2.expect(e),
                bias: ids.3.expect(e),
            }
        }))
    }
}
