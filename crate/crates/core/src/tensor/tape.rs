use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use super::{Gradients, ParamId, ParameterStore, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// Probability clamp applied inside [`Tape::bce`].
pub const BCE_CLAMP: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    AddRow(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Mean(Vec<Var>),
    MeanRows(Var),
    SumAll(Var),
    MaxRows(Var, Vec<usize>),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    PairwiseSum(Var, Var),
    Softmax(Var),
    Reshape(Var),
    Conv1dMax {
        input: Var,
        weight: Var,
        bias: Var,
        kernel: usize,
        argmax: Vec<usize>,
    },
    Bce(Var, f64),
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Tensor>,
    requires_grad: bool,
}

/// The primitive elementwise family, addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Mul,
    Relu,
    Sigmoid,
    ConcatLastAxis,
    Mean,
    MaxOverAxis,
}

impl FromStr for ElementwiseOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "add" => ElementwiseOp::Add,
            "mul" => ElementwiseOp::Mul,
            "relu" => ElementwiseOp::Relu,
            "sigmoid" => ElementwiseOp::Sigmoid,
            "concat" | "concat-last-axis" => ElementwiseOp::ConcatLastAxis,
            "mean" => ElementwiseOp::Mean,
            "max" | "max-over-axis" => ElementwiseOp::MaxOverAxis,
            other => return Err(Error::UnknownOp(other.to_string())),
        })
    }
}

/// Records a forward computation over parameters borrowed from a store.
pub struct Tape<'s> {
    store: &'s ParameterStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

/// Gradients of leaf (input) nodes after [`Tape::backward`].
#[derive(Debug)]
pub struct TapeGrads {
    grads: Vec<Option<Vec<f64>>>,
}

impl TapeGrads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn expect_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_parts(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

/// `out[m×n] += a[m×k] · b[k×n]`.
fn matmul_into(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for kk in 0..k {
            let x = a[i * k + kk];
            if x == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &w) in orow.iter_mut().zip(brow) {
                *o += x * w;
            }
        }
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParameterStore) -> Self {
        Tape {
            store,
            nodes: Vec::with_capacity(256),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParameterStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => self.store.get(id),
            _ => node.value.as_ref().expect("non-parameter node holds its value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    /// A leaf whose gradient is reported in [`TapeGrads`].
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    /// Copies `v`'s value into a new constant, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        matmul_into(&mut out, ta.data(), tb.data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), Tensor::from_parts(vec![m, n], out), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        expect_same("add", self.value(a), self.value(b))?;
        let t = zip(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), t, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        expect_same("sub", self.value(a), self.value(b))?;
        let t = zip(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Sub(a, b), t, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        expect_same("mul", self.value(a), self.value(b))?;
        let t = zip(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), t, rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = map(self.value(a), |x| c * x);
        let rg = self.rg(a);
        self.push(Op::Scale(a, c), t, rg)
    }

    /// `1 − a`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let t = map(self.value(a), |x| 1.0 - x);
        let rg = self.rg(a);
        self.push(Op::OneMinus(a), t, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = map(self.value(a), |x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(Op::Relu(a), t, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = map(self.value(a), math::sigmoid);
        let rg = self.rg(a);
        self.push(Op::Sigmoid(a), t, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = map(self.value(a), math::tanh);
        let rg = self.rg(a);
        self.push(Op::Tanh(a), t, rg)
    }

    /// Adds a `1 × m` row to every row of an `n × m` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (tx, tr) = (self.value(x), self.value(row));
        if tr.rows() != 1 || tr.cols() != tx.cols() {
            return Err(Error::shape("add_row", tx.shape(), tr.shape()));
        }
        let m = tx.cols();
        let mut out = tx.data().to_vec();
        for chunk in out.chunks_mut(m) {
            for (o, b) in chunk.iter_mut().zip(tr.data()) {
                *o += b;
            }
        }
        let shape = tx.shape().to_vec();
        let rg = self.rg(x) || self.rg(row);
        Ok(self.push(Op::AddRow(x, row), Tensor::from_parts(shape, out), rg))
    }

    /// Concatenates matrices with equal row counts along the last axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat_cols"))?;
        let rows = self.value(first).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(Error::shape("concat_cols", self.value(first).shape(), t.shape()));
            }
            cols += t.cols();
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Op::ConcatCols(parts.to_vec()),
            Tensor::from_parts(vec![rows, cols], out),
            rg,
        ))
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat_rows"))?;
        let cols = self.value(first).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(Error::shape("concat_rows", self.value(first).shape(), t.shape()));
            }
            rows += t.rows();
            out.extend_from_slice(t.data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Op::ConcatRows(parts.to_vec()),
            Tensor::from_parts(vec![rows, cols], out),
            rg,
        ))
    }

    /// Elementwise mean of equally shaped values.
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("mean"))?;
        let mut acc = self.value(first).clone();
        for &p in &parts[1..] {
            let t = self.value(p);
            expect_same("mean", &acc, t)?;
            for (a, b) in acc.data_mut().iter_mut().zip(t.data()) {
                *a += b;
            }
        }
        let inv = 1.0 / parts.len() as f64;
        acc.data_mut().iter_mut().for_each(|v| *v *= inv);
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Op::Mean(parts.to_vec()), acc, rg))
    }

    /// Column means of an `n × m` matrix, as `1 × m`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (n, m) = (t.rows(), t.cols());
        let mut out = vec![0.0; m];
        for i in 0..n {
            for (o, v) in out.iter_mut().zip(t.row_slice(i)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= n as f64);
        let rg = self.rg(x);
        self.push(Op::MeanRows(x), Tensor::row(out), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Op::SumAll(x), Tensor::scalar(s), rg)
    }

    /// Column maxima of an `n × m` matrix, as `1 × m`.
    pub fn max_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (n, m) = (t.rows(), t.cols());
        let mut out = t.row_slice(0).to_vec();
        let mut arg = vec![0usize; m];
        for i in 1..n {
            for (j, &v) in t.row_slice(i).iter().enumerate() {
                if v > out[j] {
                    out[j] = v;
                    arg[j] = i;
                }
            }
        }
        let rg = self.rg(x);
        self.push(Op::MaxRows(x, arg), Tensor::row(out), rg)
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let (n, m) = (t.rows(), t.cols());
        if idx.is_empty() {
            return Err(Error::Empty("gather_rows"));
        }
        let mut out = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            if i >= n {
                return Err(Error::InvalidArgument(alloc::format!(
                    "row {i} out of range for {n} rows"
                )));
            }
            out.extend_from_slice(t.row_slice(i));
        }
        let rg = self.rg(x);
        Ok(self.push(
            Op::GatherRows(x, idx.to_vec()),
            Tensor::from_parts(vec![idx.len(), m], out),
            rg,
        ))
    }

    /// `out[targets[r]] += x[r]` into an `n_out × m` matrix.
    pub fn scatter_add_rows(&mut self, x: Var, targets: &[usize], n_out: usize) -> Result<Var> {
        let t = self.value(x);
        if targets.len() != t.rows() || n_out == 0 {
            return Err(Error::shape("scatter_add_rows", t.shape(), &[targets.len(), n_out]));
        }
        let m = t.cols();
        let mut out = vec![0.0; n_out * m];
        for (r, &tg) in targets.iter().enumerate() {
            if tg >= n_out {
                return Err(Error::InvalidArgument(alloc::format!(
                    "target row {tg} out of range for {n_out} rows"
                )));
            }
            for (o, v) in out[tg * m..(tg + 1) * m].iter_mut().zip(t.row_slice(r)) {
                *o += v;
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Op::ScatterAddRows(x, targets.to_vec()),
            Tensor::from_parts(vec![n_out, m], out),
            rg,
        ))
    }

    /// Row `i * q.rows() + j` of the result is `p[i] + q[j]`.
    pub fn pairwise_sum(&mut self, p: Var, q: Var) -> Result<Var> {
        let (tp, tq) = (self.value(p), self.value(q));
        if tp.cols() != tq.cols() {
            return Err(Error::shape("pairwise_sum", tp.shape(), tq.shape()));
        }
        let (kp, kq, h) = (tp.rows(), tq.rows(), tp.cols());
        let mut out = Vec::with_capacity(kp * kq * h);
        for i in 0..kp {
            let pi = tp.row_slice(i);
            for j in 0..kq {
                out.extend(pi.iter().zip(tq.row_slice(j)).map(|(a, b)| a + b));
            }
        }
        let rg = self.rg(p) || self.rg(q);
        Ok(self.push(
            Op::PairwiseSum(p, q),
            Tensor::from_parts(vec![kp * kq, h], out),
            rg,
        ))
    }

    /// Softmax over all entries, with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mx = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = t.data().iter().map(|&v| math::exp(v - mx)).collect();
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= z);
        let shape = t.shape().to_vec();
        let rg = self.rg(x);
        self.push(Op::Softmax(x), Tensor::from_parts(shape, out), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape.to_vec())?;
        let rg = self.rg(x);
        Ok(self.push(Op::Reshape(x), t, rg))
    }

    /// One-dimensional convolution along the rows of `input` (`len × c_in`)
    /// followed by a max over positions.
    ///
    /// `weight` is `(kernel · c_in) × c_out`, row `t · c_in + c` holding the
    /// tap at offset `t`. The input is zero-padded by `(kernel − 1) / 2` rows
    /// on each side, so there are `len` positions for any `len ≥ 1`. Returns
    /// `1 × c_out`.
    pub fn conv1d_max(&mut self, input: Var, weight: Var, bias: Var, kernel: usize) -> Result<Var> {
        if kernel == 0 || kernel % 2 == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "kernel size must be odd and positive, got {kernel}"
            )));
        }
        let (tx, tw, tb) = (self.value(input), self.value(weight), self.value(bias));
        let (len, c_in) = (tx.rows(), tx.cols());
        let c_out = tw.cols();
        if tw.rows() != kernel * c_in {
            return Err(Error::shape("conv1d", tx.shape(), tw.shape()));
        }
        if tb.len() != c_out {
            return Err(Error::shape("conv1d bias", tw.shape(), tb.shape()));
        }
        let pad = (kernel - 1) / 2;
        let (xd, wd) = (tx.data(), tw.data());
        let mut best = vec![f64::NEG_INFINITY; c_out];
        let mut argmax = vec![0usize; c_out];
        let mut pre = vec![0.0; c_out];
        for p in 0..len {
            pre.copy_from_slice(tb.data());
            for t in 0..kernel {
                let r = p + t;
                if r < pad || r - pad >= len {
                    continue;
                }
                let r = r - pad;
                let xrow = &xd[r * c_in..(r + 1) * c_in];
                for (c, &x) in xrow.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let wrow = &wd[(t * c_in + c) * c_out..(t * c_in + c + 1) * c_out];
                    for (o, &w) in pre.iter_mut().zip(wrow) {
                        *o += x * w;
                    }
                }
            }
            for o in 0..c_out {
                if pre[o] > best[o] {
                    best[o] = pre[o];
                    argmax[o] = p;
                }
            }
        }
        let rg = self.rg(input) || self.rg(weight) || self.rg(bias);
        Ok(self.push(
            Op::Conv1dMax {
                input,
                weight,
                bias,
                kernel,
                argmax,
            },
            Tensor::row(best),
            rg,
        ))
    }

    /// Binary cross entropy of a probability against a 0/1 label; the
    /// probability is clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]`.
    pub fn bce(&mut self, y_hat: Var, label: f64) -> Result<Var> {
        if label != 0.0 && label != 1.0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "label must be 0 or 1, got {label}"
            )));
        }
        let t = self.value(y_hat);
        if t.len() != 1 {
            return Err(Error::shape("bce", t.shape(), &[1, 1]));
        }
        let p = t.item().clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        let loss = -label * math::ln(p) - (1.0 - label) * math::ln(1.0 - p);
        let rg = self.rg(y_hat);
        Ok(self.push(Op::Bce(y_hat, label), Tensor::scalar(loss), rg))
    }

    /// Sum of squared differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        expect_same("mse", self.value(a), self.value(b))?;
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mse(a, b), Tensor::scalar(s), rg))
    }

    pub fn elementwise(&mut self, op: ElementwiseOp, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidArgument(alloc::format!(
                    "{op:?} takes {n} inputs, got {}",
                    inputs.len()
                )))
            }
        };
        match op {
            ElementwiseOp::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            ElementwiseOp::Mul => {
                arity(2)?;
                self.mul(inputs[0], inputs[1])
            }
            ElementwiseOp::Relu => {
                arity(1)?;
                Ok(self.relu(inputs[0]))
            }
            ElementwiseOp::Sigmoid => {
                arity(1)?;
                Ok(self.sigmoid(inputs[0]))
            }
            ElementwiseOp::ConcatLastAxis => self.concat_cols(inputs),
            ElementwiseOp::Mean => self.mean(inputs),
            ElementwiseOp::MaxOverAxis => {
                arity(1)?;
                Ok(self.max_rows(inputs[0]))
            }
        }
    }

    /// Reverse pass from a scalar `loss`. Parameter gradients are added into
    /// `grads`; leaf gradients are returned.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<TapeGrads> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::InvalidArgument(alloc::format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        if !lt.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let mut g: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        g[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(gi) = g[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    g[i] = Some(gi);
                }
                // Only reached when the loss itself is a parameter; otherwise
                // parameter gradients are written straight into `grads`.
                Op::Param(id) => grads.accumulate(*id, &gi),
                op => self.propagate(op, i, &gi, &mut g, grads),
            }
        }
        Ok(TapeGrads { grads: g })
    }

    fn propagate(&self, op: &Op, node: usize, gout: &[f64], g: &mut [Option<Vec<f64>>], grads: &mut Gradients) {
        let out = self.nodes[node].value.as_ref().expect("op node value");
        // Borrow the gradient buffer for `v` if it needs one: the shared
        // accumulator for parameters, a zero-initialised tape slot otherwise.
        macro_rules! with_grad {
            ($v:expr, |$buf:ident| $body:expr) => {{
                let v: Var = $v;
                if self.nodes[v.0].requires_grad {
                    let len = self.value(v).len();
                    let $buf: &mut [f64] = match self.nodes[v.0].op {
                        Op::Param(id) => grads.slot(id, len),
                        _ => g[v.0].get_or_insert_with(|| vec![0.0; len]),
                    };
                    $body;
                }
            }};
        }
        match op {
            Op::Leaf | Op::Param(_) => unreachable!(),
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                with_grad!(*a, |da| {
                    for i in 0..m {
                        let grow = &gout[i * n..(i + 1) * n];
                        for kk in 0..k {
                            let brow = &tb.data()[kk * n..(kk + 1) * n];
                            da[i * k + kk] += dot(grow, brow);
                        }
                    }
                });
                with_grad!(*b, |db| {
                    for i in 0..m {
                        let grow = &gout[i * n..(i + 1) * n];
                        for kk in 0..k {
                            let x = ta.data()[i * k + kk];
                            if x == 0.0 {
                                continue;
                            }
                            for (d, &gv) in db[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                                *d += x * gv;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                with_grad!(*a, |da| add_into(da, gout));
                with_grad!(*b, |db| add_into(db, gout));
            }
            Op::Sub(a, b) => {
                with_grad!(*a, |da| add_into(da, gout));
                with_grad!(*b, |db| db.iter_mut().zip(gout).for_each(|(d, x)| *d -= x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                with_grad!(*a, |da| {
                    for ((d, x), y) in da.iter_mut().zip(gout).zip(tb.data()) {
                        *d += x * y;
                    }
                });
                with_grad!(*b, |db| {
                    for ((d, x), y) in db.iter_mut().zip(gout).zip(ta.data()) {
                        *d += x * y;
                    }
                });
            }
            Op::Scale(a, c) => with_grad!(*a, |da| {
                da.iter_mut().zip(gout).for_each(|(d, x)| *d += c * x)
            }),
            Op::OneMinus(a) => with_grad!(*a, |da| {
                da.iter_mut().zip(gout).for_each(|(d, x)| *d -= x)
            }),
            Op::Relu(a) => with_grad!(*a, |da| {
                for ((d, x), y) in da.iter_mut().zip(gout).zip(out.data()) {
                    if *y > 0.0 {
                        *d += x;
                    }
                }
            }),
            Op::Sigmoid(a) => with_grad!(*a, |da| {
                for ((d, x), y) in da.iter_mut().zip(gout).zip(out.data()) {
                    *d += x * y * (1.0 - y);
                }
            }),
            Op::Tanh(a) => with_grad!(*a, |da| {
                for ((d, x), y) in da.iter_mut().zip(gout).zip(out.data()) {
                    *d += x * (1.0 - y * y);
                }
            }),
            Op::AddRow(x, row) => {
                with_grad!(*x, |dx| add_into(dx, gout));
                let m = out.cols();
                with_grad!(*row, |dr| {
                    for chunk in gout.chunks(m) {
                        add_into(dr, chunk);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (rows, cols) = (out.rows(), out.cols());
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    with_grad!(p, |dp| {
                        for i in 0..rows {
                            let src = &gout[i * cols + offset..i * cols + offset + pc];
                            add_into(&mut dp[i * pc..(i + 1) * pc], src);
                        }
                    });
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    with_grad!(p, |dp| add_into(dp, &gout[offset..offset + n]));
                    offset += n;
                }
            }
            Op::Mean(parts) => {
                let inv = 1.0 / parts.len() as f64;
                for &p in parts {
                    with_grad!(p, |dp| {
                        dp.iter_mut().zip(gout).for_each(|(d, x)| *d += inv * x)
                    });
                }
            }
            Op::MeanRows(x) => {
                let n = self.value(*x).rows();
                let inv = 1.0 / n as f64;
                with_grad!(*x, |dx| {
                    for chunk in dx.chunks_mut(gout.len()) {
                        chunk.iter_mut().zip(gout).for_each(|(d, v)| *d += inv * v);
                    }
                });
            }
            Op::SumAll(x) => with_grad!(*x, |dx| dx.iter_mut().for_each(|d| *d += gout[0])),
            Op::MaxRows(x, arg) => {
                let m = out.cols();
                with_grad!(*x, |dx| {
                    for (j, &r) in arg.iter().enumerate() {
                        dx[r * m + j] += gout[j];
                    }
                });
            }
            Op::GatherRows(x, idx) => {
                let m = out.cols();
                with_grad!(*x, |dx| {
                    for (r, &src) in idx.iter().enumerate() {
                        add_into(&mut dx[src * m..(src + 1) * m], &gout[r * m..(r + 1) * m]);
                    }
                });
            }
            Op::ScatterAddRows(x, targets) => {
                let m = out.cols();
                with_grad!(*x, |dx| {
                    for (r, &tg) in targets.iter().enumerate() {
                        add_into(&mut dx[r * m..(r + 1) * m], &gout[tg * m..(tg + 1) * m]);
                    }
                });
            }
            Op::PairwiseSum(p, q) => {
                let kq = self.value(*q).rows();
                let kp = self.value(*p).rows();
                let h = out.cols();
                with_grad!(*p, |dp| {
                    for i in 0..kp {
                        for j in 0..kq {
                            let r = i * kq + j;
                            add_into(&mut dp[i * h..(i + 1) * h], &gout[r * h..(r + 1) * h]);
                        }
                    }
                });
                with_grad!(*q, |dq| {
                    for i in 0..kp {
                        for j in 0..kq {
                            let r = i * kq + j;
                            add_into(&mut dq[j * h..(j + 1) * h], &gout[r * h..(r + 1) * h]);
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let y = out.data();
                let dot: f64 = gout.iter().zip(y).map(|(a, b)| a * b).sum();
                with_grad!(*x, |dx| {
                    for ((d, gv), yv) in dx.iter_mut().zip(gout).zip(y) {
                        *d += yv * (gv - dot);
                    }
                });
            }
            Op::Reshape(x) => with_grad!(*x, |dx| add_into(dx, gout)),
            Op::Conv1dMax {
                input,
                weight,
                bias,
                kernel,
                argmax,
            } => {
                let (tx, tw) = (self.value(*input), self.value(*weight));
                let (len, c_in) = (tx.rows(), tx.cols());
                let c_out = tw.cols();
                let pad = (kernel - 1) / 2;
                with_grad!(*bias, |db| add_into(db, gout));
                let rows_for = |p: usize| {
                    (0..*kernel).filter_map(move |t| {
                        let r = p + t;
                        (r >= pad && r - pad < len).then(|| (t, r - pad))
                    })
                };
                // Channel gradients grouped by the position that won the max.
                let mut positions: Vec<usize> = argmax.clone();
                positions.sort_unstable();
                positions.dedup();
                let mut gp = vec![0.0; c_out];
                with_grad!(*weight, |dw| {
                    for &p in &positions {
                        for o in 0..c_out {
                            gp[o] = if argmax[o] == p { gout[o] } else { 0.0 };
                        }
                        for (t, r) in rows_for(p) {
                            let xrow = &tx.data()[r * c_in..(r + 1) * c_in];
                            for (c, &x) in xrow.iter().enumerate() {
                                if x == 0.0 {
                                    continue;
                                }
                                let base = (t * c_in + c) * c_out;
                                for (d, &gv) in dw[base..base + c_out].iter_mut().zip(&gp) {
                                    *d += x * gv;
                                }
                            }
                        }
                    }
                });
                with_grad!(*input, |dx| {
                    for (o, &p) in argmax.iter().enumerate() {
                        let gv = gout[o];
                        for (t, r) in rows_for(p) {
                            for c in 0..c_in {
                                dx[r * c_in + c] += gv * tw.data()[(t * c_in + c) * c_out + o];
                            }
                        }
                    }
                });
            }
            Op::Bce(y_hat, label) => {
                let p = self.value(*y_hat).item();
                let inside = p > BCE_CLAMP && p < 1.0 - BCE_CLAMP;
                with_grad!(*y_hat, |dy| {
                    if inside {
                        dy[0] += gout[0] * (-label / p + (1.0 - label) / (1.0 - p));
                    }
                });
            }
            Op::Mse(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let diff: Vec<f64> = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
                with_grad!(*a, |da| {
                    da.iter_mut().zip(&diff).for_each(|(d, v)| *d += 2.0 * v * gout[0])
                });
                with_grad!(*b, |db| {
                    db.iter_mut().zip(&diff).for_each(|(d, v)| *d -= 2.0 * v * gout[0])
                });
            }
        }
    }
}

#[inline]
/// Dot product with four independent accumulators (fixed order, so still
/// deterministic).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl core::fmt::Debug for Tape<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.nodes.len()).finish()
    }
}
