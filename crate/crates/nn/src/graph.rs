//! Tape-based reverse-mode differentiation. Nodes are appended in evaluation
//! order, so walking the tape backwards visits them in reverse topological
//! order.

use serde::{Deserialize, Serialize};

use crate::crf;
use crate::tensor::Tensor;
use crate::NnError;

pub type NodeId = usize;
pub type ParamId = usize;

/// Named parameter tensors; frozen entries receive gradients but are never
/// updated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    trainable: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        self.trainable.push(trainable);
        self.values.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> std::ops::Range<ParamId> {
        0..self.values.len()
    }

    /// Scalar count over all tensors, or over trainable ones only.
    pub fn num_parameters(&self, trainable_only: bool) -> usize {
        self.ids()
            .filter(|&i| !trainable_only || self.trainable[i])
            .map(|i| self.values[i].len())
            .sum()
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Tensor>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads {
            tensors: store.values.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id]
    }

    pub fn scale(&mut self, c: f64) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn clear(&mut self) {
        for t in &mut self.tensors {
            t.fill(0.0);
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Lookup { param: ParamId, row: usize },
    MatVec(NodeId, NodeId),
    MatTVec(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    OneMinus(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Stack(Vec<NodeId>),
    Row(NodeId, usize),
    Softmax(NodeId),
    SoftmaxCe(NodeId, usize),
    Conv1d { input: NodeId, filters: NodeId, bias: NodeId, width: usize },
    MaxOverTime(NodeId),
    MeanRows(NodeId),
    Mask(NodeId, Vec<f64>),
    Sum(NodeId),
    Dot(NodeId, NodeId),
    CrfNll { emissions: NodeId, transitions: NodeId, gold: Vec<usize> },
}

struct Node {
    op: Op,
    value: Option<Tensor>,
}

fn shape_err(op: &'static str, detail: String) -> NnError {
    NnError::Shape { op, detail }
}

/// One forward computation. Parameter values are read from the borrowed
/// store; gradients flow into a [`Grads`] buffer on [`Graph::backward`].
pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    non_finite: Option<NodeId>,
}

type R = Result<NodeId, NnError>;

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            non_finite: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let n = &self.nodes[id];
        match (&n.value, &n.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.store.get(*p),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let finite = value.is_finite();
        self.nodes.push(Node { op, value: Some(value) });
        let id = self.nodes.len() - 1;
        if !finite && self.non_finite.is_none() {
            self.non_finite = Some(id);
        }
        id
    }

    /// Name of the first operation whose value was not finite.
    pub fn first_non_finite(&self) -> Option<String> {
        self.non_finite.map(|id| {
            let s = format!("{:?}", self.nodes[id].op);
            s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
        })
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        self.nodes.len() - 1
    }

    /// Row `row` of a parameter matrix; the gradient goes to that row only.
    pub fn lookup(&mut self, param: ParamId, row: usize) -> R {
        let m = self.store.get(param);
        if m.rank() != 2 || row >= m.rows() {
            return Err(shape_err("lookup", format!("row {row} of {:?}", m.shape())));
        }
        let v = Tensor::vector(m.row(row).to_vec());
        Ok(self.push(Op::Lookup { param, row }, v))
    }

    /// `a [m x k] * x [k] -> [m]`
    pub fn matvec(&mut self, a: NodeId, x: NodeId) -> R {
        let (av, xv) = (self.value(a), self.value(x));
        if av.rank() != 2 || xv.rank() != 1 || av.cols() != xv.len() {
            return Err(shape_err("matvec", format!("{:?} x {:?}", av.shape(), xv.shape())));
        }
        let k = av.cols();
        let out: Vec<f64> = (0..av.rows())
            .map(|i| av.row(i).iter().zip(xv.data()).map(|(p, q)| p * q).sum())
            .collect();
        debug_assert_eq!(out.len() * k, av.len());
        Ok(self.push(Op::MatVec(a, x), Tensor::vector(out)))
    }

    /// `a^T [k x m] * x [m] -> [k]`
    pub fn mat_t_vec(&mut self, a: NodeId, x: NodeId) -> R {
        let (av, xv) = (self.value(a), self.value(x));
        if av.rank() != 2 || xv.rank() != 1 || av.rows() != xv.len() {
            return Err(shape_err("mat_t_vec", format!("{:?}^T x {:?}", av.shape(), xv.shape())));
        }
        let mut out = vec![0.0; av.cols()];
        for i in 0..av.rows() {
            let xi = xv.data()[i];
            for (o, w) in out.iter_mut().zip(av.row(i)) {
                *o += w * xi;
            }
        }
        Ok(self.push(Op::MatTVec(a, x), Tensor::vector(out)))
    }

    /// `a [m x k] * b [k x n] -> [m x n]`
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> R {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows() {
            return Err(shape_err("matmul", format!("{:?} x {:?}", av.shape(), bv.shape())));
        }
        let (m, k, n) = (av.rows(), av.cols(), bv.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av.data()[i * k + p];
                for j in 0..n {
                    out[i * n + j] += x * bv.data()[p * n + j];
                }
            }
        }
        Ok(self.push(Op::MatMul(a, b), Tensor::matrix(m, n, out)?))
    }

    fn zip(&mut self, name: &'static str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> R {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err(name, format!("{:?} vs {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        let v = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(op, v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> R {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> R {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> R {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let av = self.value(a);
        let v = Tensor::new(av.shape().to_vec(), av.data().iter().map(|x| f(*x)).collect()).expect("same shape");
        self.push(op, v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, a: NodeId, mask: Vec<f64>) -> R {
        if mask.len() != self.value(a).len() {
            return Err(shape_err("mask", format!("{} values for {:?}", mask.len(), self.value(a).shape())));
        }
        let v: Vec<f64> = self.value(a).data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let v = Tensor::new(self.value(a).shape().to_vec(), v)?;
        Ok(self.push(Op::Mask(a, mask), v))
    }

    /// Joins vectors end to end.
    pub fn concat(&mut self, parts: &[NodeId]) -> R {
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 1 {
                return Err(shape_err("concat", format!("operand of shape {:?}", v.shape())));
            }
            data.extend_from_slice(v.data());
        }
        if data.is_empty() {
            return Err(shape_err("concat", "no operands".into()));
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data)))
    }

    /// `a[start .. start + len]` of a vector.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> R {
        let v = self.value(a);
        if v.rank() != 1 || len == 0 || start + len > v.len() {
            return Err(shape_err("slice", format!("[{start}..{}] of {:?}", start + len, v.shape())));
        }
        let t = Tensor::vector(v.data()[start..start + len].to_vec());
        Ok(self.push(Op::Slice(a, start), t))
    }

    /// Stacks equal-length vectors as matrix rows.
    pub fn stack(&mut self, rows: &[NodeId]) -> R {
        let Some(&first) = rows.first() else {
            return Err(shape_err("stack", "no rows".into()));
        };
        let d = self.value(first).len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let v = self.value(r);
            if v.rank() != 1 || v.len() != d {
                return Err(shape_err("stack", format!("row {:?} among rows of {d}", v.shape())));
            }
            data.extend_from_slice(v.data());
        }
        let t = Tensor::matrix(rows.len(), d, data)?;
        Ok(self.push(Op::Stack(rows.to_vec()), t))
    }

    pub fn row(&mut self, a: NodeId, i: usize) -> R {
        let v = self.value(a);
        if v.rank() != 2 || i >= v.rows() {
            return Err(shape_err("row", format!("row {i} of {:?}", v.shape())));
        }
        let t = Tensor::vector(v.row(i).to_vec());
        Ok(self.push(Op::Row(a, i), t))
    }

    pub fn softmax(&mut self, a: NodeId) -> R {
        let v = self.value(a);
        if v.rank() != 1 {
            return Err(shape_err("softmax", format!("{:?}", v.shape())));
        }
        let t = Tensor::vector(softmax(v.data()));
        Ok(self.push(Op::Softmax(a), t))
    }

    /// `-log softmax(logits)[target]`.
    pub fn softmax_ce(&mut self, logits: NodeId, target: usize) -> R {
        let v = self.value(logits);
        if v.rank() != 1 || target >= v.len() {
            return Err(shape_err("softmax_ce", format!("target {target} for {:?}", v.shape())));
        }
        let loss = crf::logsumexp(v.data()) - v.data()[target];
        Ok(self.push(Op::SoftmaxCe(logits, target), Tensor::scalar(loss)))
    }

    /// Valid 1-D convolution of `input [T x C]` with `filters [F x (width * C)]`
    /// plus `bias [F]`, giving `[(T - width + 1) x F]`.
    pub fn conv1d(&mut self, input: NodeId, filters: NodeId, bias: NodeId, width: usize) -> R {
        let (x, w, b) = (self.value(input), self.value(filters), self.value(bias));
        let (t, c) = (x.rows(), x.cols());
        if x.rank() != 2 || w.rank() != 2 || width == 0 || t < width || w.cols() != width * c || b.len() != w.rows() {
            return Err(shape_err(
                "conv1d",
                format!("input {:?}, filters {:?}, bias {:?}, width {width}", x.shape(), w.shape(), b.shape()),
            ));
        }
        let f = w.rows();
        let steps = t - width + 1;
        let mut out = vec![0.0; steps * f];
        for s in 0..steps {
            let window = &x.data()[s * c..(s + width) * c];
            for k in 0..f {
                out[s * f + k] = b.data()[k] + w.row(k).iter().zip(window).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        let v = Tensor::matrix(steps, f, out)?;
        Ok(self.push(Op::Conv1d { input, filters, bias, width }, v))
    }

    /// Column-wise maximum of a matrix.
    pub fn max_over_time(&mut self, a: NodeId) -> R {
        let v = self.value(a);
        if v.rank() != 2 {
            return Err(shape_err("max_over_time", format!("{:?}", v.shape())));
        }
        let out: Vec<f64> = (0..v.cols())
            .map(|j| (0..v.rows()).map(|i| v.data()[i * v.cols() + j]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(self.push(Op::MaxOverTime(a), Tensor::vector(out)))
    }

    /// Column-wise mean of a matrix.
    pub fn mean_rows(&mut self, a: NodeId) -> R {
        let v = self.value(a);
        if v.rank() != 2 {
            return Err(shape_err("mean_rows", format!("{:?}", v.shape())));
        }
        let n = v.rows() as f64;
        let out: Vec<f64> = (0..v.cols())
            .map(|j| (0..v.rows()).map(|i| v.data()[i * v.cols() + j]).sum::<f64>() / n)
            .collect();
        Ok(self.push(Op::MeanRows(a), Tensor::vector(out)))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> R {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(shape_err("dot", format!("{:?} . {:?}", av.shape(), bv.shape())));
        }
        let s = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Op::Dot(a, b), Tensor::scalar(s)))
    }

    /// Sum of scalar nodes.
    pub fn add_all(&mut self, items: &[NodeId]) -> R {
        let mut it = items.iter();
        let Some(&first) = it.next() else {
            return Err(shape_err("add_all", "no operands".into()));
        };
        let mut acc = first;
        for &x in it {
            acc = self.add(acc, x)?;
        }
        Ok(acc)
    }

    /// Negative log-likelihood of `gold` under a chain CRF with start/stop
    /// states: `log Z - score(gold)`.
    pub fn crf_nll(&mut self, emissions: NodeId, transitions: NodeId, gold: &[usize]) -> R {
        let (e, t) = (self.value(emissions), self.value(transitions));
        let l = e.cols();
        if e.rank() != 2 || t.shape() != [l + 2, l + 2] {
            return Err(shape_err("crf_nll", format!("emissions {:?}, transitions {:?}", e.shape(), t.shape())));
        }
        if gold.len() != e.rows() || gold.iter().any(|&y| y >= l) {
            return Err(shape_err("crf_nll", format!("gold path of {} labels for {} positions", gold.len(), e.rows())));
        }
        let loss = crf::log_partition(e, t) - crf::path_score(e, t, gold);
        Ok(self.push(
            Op::CrfNll {
                emissions,
                transitions,
                gold: gold.to_vec(),
            },
            Tensor::scalar(loss),
        ))
    }

    /// Accumulates d(output)/d(parameter) into `grads`. `output` must be a
    /// scalar.
    pub fn backward(&self, output: NodeId, grads: &mut Grads) -> Result<(), NnError> {
        if self.value(output).len() != 1 {
            return Err(shape_err("backward", format!("output of shape {:?}", self.value(output).shape())));
        }
        let mut ng: Vec<Option<Tensor>> = vec![None; output + 1];
        ng[output] = Some(Tensor::scalar(1.0));
        for id in (0..=output).rev() {
            let Some(g) = ng[id].take() else { continue };
            self.backward_node(id, &g, &mut ng, grads);
        }
        Ok(())
    }

    fn backward_node(&self, id: NodeId, g: &Tensor, ng: &mut [Option<Tensor>], grads: &mut Grads) {
        let gd = g.data();
        let y = self.value(id);
        match &self.nodes[id].op {
            Op::Constant => {}
            Op::Param(p) => grads.tensors[*p].add_assign(g),
            Op::Lookup { param, row } => {
                for (a, b) in grads.tensors[*param].row_mut(*row).iter_mut().zip(gd) {
                    *a += b;
                }
            }
            Op::MatVec(a, x) => {
                let (av, xv) = (self.value(*a), self.value(*x));
                let k = av.cols();
                let mut da = vec![0.0; av.len()];
                let mut dx = vec![0.0; k];
                for (i, gi) in gd.iter().enumerate() {
                    let row = av.row(i);
                    for j in 0..k {
                        da[i * k + j] = gi * xv.data()[j];
                        dx[j] += row[j] * gi;
                    }
                }
                acc(ng, *a, Tensor::new(av.shape().to_vec(), da).unwrap());
                acc(ng, *x, Tensor::vector(dx));
            }
            Op::MatTVec(a, x) => {
                let (av, xv) = (self.value(*a), self.value(*x));
                let k = av.cols();
                let mut da = vec![0.0; av.len()];
                let mut dx = vec![0.0; av.rows()];
                for i in 0..av.rows() {
                    let row = av.row(i);
                    let xi = xv.data()[i];
                    for j in 0..k {
                        da[i * k + j] = xi * gd[j];
                        dx[i] += row[j] * gd[j];
                    }
                }
                acc(ng, *a, Tensor::new(av.shape().to_vec(), da).unwrap());
                acc(ng, *x, Tensor::vector(dx));
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                let mut da = vec![0.0; m * k];
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += gd[i * n + j] * bv.data()[p * n + j];
                            db[p * n + j] += av.data()[i * k + p] * gd[i * n + j];
                        }
                        da[i * k + p] = s;
                    }
                }
                acc(ng, *a, Tensor::matrix(m, k, da).unwrap());
                acc(ng, *b, Tensor::matrix(k, n, db).unwrap());
            }
            Op::Add(a, b) => {
                acc(ng, *a, g.clone());
                acc(ng, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(ng, *a, g.clone());
                acc(ng, *b, like(g, gd.iter().map(|v| -v).collect()));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(ng, *a, like(g, gd.iter().zip(bv.data()).map(|(p, q)| p * q).collect()));
                acc(ng, *b, like(g, gd.iter().zip(av.data()).map(|(p, q)| p * q).collect()));
            }
            Op::Scale(a, c) => acc(ng, *a, like(g, gd.iter().map(|v| c * v).collect())),
            Op::OneMinus(a) => acc(ng, *a, like(g, gd.iter().map(|v| -v).collect())),
            Op::Sigmoid(a) => acc(ng, *a, like(g, gd.iter().zip(y.data()).map(|(p, s)| p * s * (1.0 - s)).collect())),
            Op::Tanh(a) => acc(ng, *a, like(g, gd.iter().zip(y.data()).map(|(p, t)| p * (1.0 - t * t)).collect())),
            Op::Relu(a) => {
                let av = self.value(*a);
                acc(ng, *a, like(g, gd.iter().zip(av.data()).map(|(p, x)| if *x > 0.0 { *p } else { 0.0 }).collect()));
            }
            Op::Mask(a, m) => acc(ng, *a, like(g, gd.iter().zip(m).map(|(p, q)| p * q).collect())),
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    acc(ng, p, Tensor::vector(gd[off..off + n].to_vec()));
                    off += n;
                }
            }
            Op::Slice(a, start) => {
                let mut d = vec![0.0; self.value(*a).len()];
                d[*start..*start + gd.len()].copy_from_slice(gd);
                acc(ng, *a, Tensor::vector(d));
            }
            Op::Stack(rows) => {
                for (i, &r) in rows.iter().enumerate() {
                    acc(ng, r, Tensor::vector(g.row(i).to_vec()));
                }
            }
            Op::Row(a, i) => {
                let av = self.value(*a);
                let mut d = Tensor::zeros(av.shape());
                d.row_mut(*i).copy_from_slice(gd);
                acc(ng, *a, d);
            }
            Op::Softmax(a) => {
                let s: f64 = gd.iter().zip(y.data()).map(|(p, q)| p * q).sum();
                acc(ng, *a, like(g, y.data().iter().zip(gd).map(|(q, p)| q * (p - s)).collect()));
            }
            Op::SoftmaxCe(a, target) => {
                let mut p = softmax(self.value(*a).data());
                p[*target] -= 1.0;
                let g0 = gd[0];
                acc(ng, *a, Tensor::vector(p.into_iter().map(|v| v * g0).collect()));
            }
            Op::Conv1d { input, filters, bias, width } => {
                let (x, w) = (self.value(*input), self.value(*filters));
                let (c, f) = (x.cols(), w.rows());
                let steps = y.rows();
                let mut dx = vec![0.0; x.len()];
                let mut dw = vec![0.0; w.len()];
                let mut db = vec![0.0; f];
                let wc = width * c;
                for s in 0..steps {
                    let window = &x.data()[s * c..(s + width) * c];
                    for k in 0..f {
                        let gk = gd[s * f + k];
                        if gk == 0.0 {
                            continue;
                        }
                        db[k] += gk;
                        let wr = w.row(k);
                        for q in 0..wc {
                            dw[k * wc + q] += gk * window[q];
                            dx[s * c + q] += gk * wr[q];
                        }
                    }
                }
                acc(ng, *input, Tensor::new(x.shape().to_vec(), dx).unwrap());
                acc(ng, *filters, Tensor::new(w.shape().to_vec(), dw).unwrap());
                acc(ng, *bias, Tensor::vector(db));
            }
            Op::MaxOverTime(a) => {
                let av = self.value(*a);
                let (r, c) = (av.rows(), av.cols());
                let mut d = vec![0.0; av.len()];
                for j in 0..c {
                    // first row attaining the maximum takes the gradient
                    let i = (0..r).find(|&i| av.data()[i * c + j] == y.data()[j]).unwrap_or(0);
                    d[i * c + j] = gd[j];
                }
                acc(ng, *a, Tensor::new(av.shape().to_vec(), d).unwrap());
            }
            Op::MeanRows(a) => {
                let av = self.value(*a);
                let (r, c) = (av.rows(), av.cols());
                let d: Vec<f64> = (0..r * c).map(|k| gd[k % c] / r as f64).collect();
                acc(ng, *a, Tensor::new(av.shape().to_vec(), d).unwrap());
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                acc(ng, *a, like(av, vec![gd[0]; av.len()]));
            }
            Op::Dot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(ng, *a, like(av, bv.data().iter().map(|v| v * gd[0]).collect()));
                acc(ng, *b, like(bv, av.data().iter().map(|v| v * gd[0]).collect()));
            }
            Op::CrfNll { emissions, transitions, gold } => {
                let (e, t) = (self.value(*emissions), self.value(*transitions));
                let (_, mut node, mut pair) = crf::marginals(e, t);
                let l = e.cols();
                let w = l + 2;
                for (i, &yi) in gold.iter().enumerate() {
                    node[i * l + yi] -= 1.0;
                }
                pair[l * w + gold[0]] -= 1.0;
                pair[gold[gold.len() - 1] * w + l + 1] -= 1.0;
                for p in gold.windows(2) {
                    pair[p[0] * w + p[1]] -= 1.0;
                }
                let g0 = gd[0];
                node.iter_mut().for_each(|v| *v *= g0);
                pair.iter_mut().for_each(|v| *v *= g0);
                acc(ng, *emissions, Tensor::new(e.shape().to_vec(), node).unwrap());
                acc(ng, *transitions, Tensor::new(t.shape().to_vec(), pair).unwrap());
            }
        }
    }
}

fn like(t: &Tensor, data: Vec<f64>) -> Tensor {
    Tensor::new(t.shape().to_vec(), data).expect("same shape")
}

fn acc(ng: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut ng[id] {
        Some(t) => t.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
