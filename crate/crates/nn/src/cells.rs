//! Recurrent cells, affine layers and the character convolution.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, NodeId, ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::NnError;

/// Uniform in `±1/sqrt(fan_in)`.
pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-bound..bound)).collect()).expect("positive shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Elman,
    Gru,
    Lstm,
}

impl CellKind {
    fn gates(self) -> usize {
        match self {
            CellKind::Elman => 1,
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }
}

/// `y = W x + b`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

pub struct BoundLinear {
    w: NodeId,
    b: NodeId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = store.add(format!("{name}.w"), uniform(rng, &[output, input], input), true);
        let b = store.add(format!("{name}.b"), uniform(rng, &[output], input), true);
        Linear { w, b, input, output }
    }

    pub fn bind(&self, g: &mut Graph) -> BoundLinear {
        BoundLinear {
            w: g.param(self.w),
            b: g.param(self.b),
        }
    }
}

impl BoundLinear {
    pub fn apply(&self, g: &mut Graph, x: NodeId) -> Result<NodeId, NnError> {
        let y = g.matvec(self.w, x)?;
        g.add(y, self.b)
    }
}

/// Gate blocks are stacked row-wise: LSTM `[i; f; g; o]`, GRU `[z; r; h]`.
/// For the GRU, `u` covers the `z` and `r` blocks and `u_h` the candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub kind: CellKind,
    pub input: usize,
    pub hidden: usize,
    pub w: ParamId,
    pub u: ParamId,
    pub u_h: Option<ParamId>,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct State {
    pub h: NodeId,
    pub c: Option<NodeId>,
}

pub struct BoundCell {
    cell: Cell,
    w: NodeId,
    u: NodeId,
    u_h: Option<NodeId>,
    b: NodeId,
}

impl Cell {
    pub fn new(store: &mut ParamStore, name: &str, kind: CellKind, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let k = kind.gates();
        let w = store.add(format!("{name}.w"), uniform(rng, &[k * hidden, input], input), true);
        let (u, u_h) = if kind == CellKind::Gru {
            let u = store.add(format!("{name}.u"), uniform(rng, &[2 * hidden, hidden], hidden), true);
            let uh = store.add(format!("{name}.u_h"), uniform(rng, &[hidden, hidden], hidden), true);
            (u, Some(uh))
        } else {
            (store.add(format!("{name}.u"), uniform(rng, &[k * hidden, hidden], hidden), true), None)
        };
        let b = store.add(format!("{name}.b"), uniform(rng, &[k * hidden], input), true);
        Cell {
            kind,
            input,
            hidden,
            w,
            u,
            u_h,
            b,
        }
    }

    pub fn bind(&self, g: &mut Graph) -> BoundCell {
        BoundCell {
            cell: *self,
            w: g.param(self.w),
            u: g.param(self.u),
            u_h: self.u_h.map(|p| g.param(p)),
            b: g.param(self.b),
        }
    }
}

impl BoundCell {
    pub fn zero_state(&self, g: &mut Graph) -> State {
        let h = g.constant(Tensor::zeros(&[self.cell.hidden]));
        let c = (self.cell.kind == CellKind::Lstm).then(|| g.constant(Tensor::zeros(&[self.cell.hidden])));
        State { h, c }
    }

    /// State for a given hidden vector; an LSTM starts with a zero cell.
    pub fn state_from(&self, g: &mut Graph, h: NodeId) -> State {
        let c = (self.cell.kind == CellKind::Lstm).then(|| g.constant(Tensor::zeros(&[self.cell.hidden])));
        State { h, c }
    }

    pub fn step(&self, g: &mut Graph, x: NodeId, s: State) -> Result<State, NnError> {
        let n = self.cell.hidden;
        let wx = g.matvec(self.w, x)?;
        let wx = g.add(wx, self.b)?;
        match self.cell.kind {
            CellKind::Elman => {
                let uh = g.matvec(self.u, s.h)?;
                let pre = g.add(wx, uh)?;
                Ok(State { h: g.tanh(pre), c: None })
            }
            CellKind::Lstm => {
                let c = s.c.ok_or_else(|| NnError::Shape {
                    op: "lstm",
                    detail: "state without a cell vector".into(),
                })?;
                let uh = g.matvec(self.u, s.h)?;
                let pre = g.add(wx, uh)?;
                let i = g.slice(pre, 0, n)?;
                let i = g.sigmoid(i);
                let f = g.slice(pre, n, n)?;
                let f = g.sigmoid(f);
                let cand = g.slice(pre, 2 * n, n)?;
                let cand = g.tanh(cand);
                let o = g.slice(pre, 3 * n, n)?;
                let o = g.sigmoid(o);
                let fc = g.mul(f, c)?;
                let ig = g.mul(i, cand)?;
                let c2 = g.add(fc, ig)?;
                let tc = g.tanh(c2);
                let h2 = g.mul(o, tc)?;
                Ok(State { h: h2, c: Some(c2) })
            }
            CellKind::Gru => {
                let uzr = g.matvec(self.u, s.h)?;
                let wz = g.slice(wx, 0, n)?;
                let uz = g.slice(uzr, 0, n)?;
                let z = g.add(wz, uz)?;
                let z = g.sigmoid(z);
                let wr = g.slice(wx, n, n)?;
                let ur = g.slice(uzr, n, n)?;
                let r = g.add(wr, ur)?;
                let r = g.sigmoid(r);
                let rh = g.mul(r, s.h)?;
                let u_h = self.u_h.expect("GRU binds a candidate matrix");
                let uh = g.matvec(u_h, rh)?;
                let wh = g.slice(wx, 2 * n, n)?;
                let cand = g.add(wh, uh)?;
                let cand = g.tanh(cand);
                let keep = g.one_minus(z);
                let a = g.mul(keep, s.h)?;
                let b = g.mul(z, cand)?;
                Ok(State { h: g.add(a, b)?, c: None })
            }
        }
    }

    /// Runs over `xs` (right to left when `reverse`); outputs are returned in
    /// input order, with the final state.
    pub fn run(&self, g: &mut Graph, xs: &[NodeId], init: Option<State>, reverse: bool) -> Result<(Vec<NodeId>, State), NnError> {
        let mut s = match init {
            Some(s) => s,
            None => self.zero_state(g),
        };
        let mut out = vec![0; xs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..xs.len()).rev())
        } else {
            Box::new(0..xs.len())
        };
        for i in order {
            s = self.step(g, xs[i], s)?;
            out[i] = s.h;
        }
        Ok((out, s))
    }
}

/// A forward cell and an optional backward cell whose outputs are concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoder {
    pub fwd: Cell,
    pub bwd: Option<Cell>,
}

pub struct BoundEncoder {
    pub fwd: BoundCell,
    pub bwd: Option<BoundCell>,
}

impl Encoder {
    /// `hidden` is the concatenated output size; each direction gets half of
    /// it when bidirectional.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        kind: CellKind,
        input: usize,
        hidden: usize,
        bidirectional: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let per = if bidirectional { hidden / 2 } else { hidden };
        let fwd = Cell::new(store, &format!("{name}.fwd"), kind, input, per, rng);
        let bwd = bidirectional.then(|| Cell::new(store, &format!("{name}.bwd"), kind, input, per, rng));
        Encoder { fwd, bwd }
    }

    pub fn output_size(&self) -> usize {
        self.fwd.hidden + self.bwd.map_or(0, |c| c.hidden)
    }

    pub fn bind(&self, g: &mut Graph) -> BoundEncoder {
        BoundEncoder {
            fwd: self.fwd.bind(g),
            bwd: self.bwd.map(|c| c.bind(g)),
        }
    }
}

impl BoundEncoder {
    /// Per-position outputs and the summary vector (last forward state joined
    /// with the first backward state). `init` gives per-direction initial
    /// hidden vectors.
    pub fn run(&self, g: &mut Graph, xs: &[NodeId], init: Option<(NodeId, Option<NodeId>)>) -> Result<(Vec<NodeId>, NodeId), NnError> {
        let fi = init.map(|(f, _)| self.fwd.state_from(g, f));
        let (fo, fs) = self.fwd.run(g, xs, fi, false)?;
        match &self.bwd {
            None => Ok((fo, fs.h)),
            Some(b) => {
                let bi = match init {
                    Some((_, Some(h))) => Some(b.state_from(g, h)),
                    _ => None,
                };
                let (bo, bs) = b.run(g, xs, bi, true)?;
                let outs = fo
                    .iter()
                    .zip(&bo)
                    .map(|(&f, &b)| g.concat(&[f, b]))
                    .collect::<Result<Vec<_>, _>>()?;
                let summary = g.concat(&[fs.h, bs.h])?;
                Ok((outs, summary))
            }
        }
    }
}

/// Reserved character ids.
pub const CHAR_PAD: usize = 0;
pub const CHAR_UNK: usize = 1;
pub const CHAR_WIDTH: usize = 3;

/// Character embeddings, a width-3 convolution and max-over-time pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharConv {
    pub emb: ParamId,
    pub filters: ParamId,
    pub bias: ParamId,
    pub char_dim: usize,
    pub n_filters: usize,
}

pub struct BoundCharConv {
    conv: CharConv,
    filters: NodeId,
    bias: NodeId,
}

impl CharConv {
    pub fn new(store: &mut ParamStore, name: &str, n_chars: usize, char_dim: usize, n_filters: usize, rng: &mut ChaCha8Rng) -> Self {
        let emb = store.add(format!("{name}.emb"), uniform(rng, &[n_chars, char_dim], char_dim), true);
        let fan = CHAR_WIDTH * char_dim;
        let filters = store.add(format!("{name}.filters"), uniform(rng, &[n_filters, fan], fan), true);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[n_filters]), true);
        CharConv {
            emb,
            filters,
            bias,
            char_dim,
            n_filters,
        }
    }

    pub fn bind(&self, g: &mut Graph) -> BoundCharConv {
        BoundCharConv {
            conv: *self,
            filters: g.param(self.filters),
            bias: g.param(self.bias),
        }
    }
}

impl BoundCharConv {
    /// Words shorter than the kernel are right-padded with [`CHAR_PAD`].
    pub fn embed(&self, g: &mut Graph, chars: &[usize]) -> Result<NodeId, NnError> {
        if chars.is_empty() {
            return Err(NnError::Data("empty word has no characters".into()));
        }
        let mut rows = Vec::with_capacity(chars.len().max(CHAR_WIDTH));
        for &c in chars {
            rows.push(g.lookup(self.conv.emb, c)?);
        }
        while rows.len() < CHAR_WIDTH {
            rows.push(g.lookup(self.conv.emb, CHAR_PAD)?);
        }
        let m = g.stack(&rows)?;
        let conv = g.conv1d(m, self.filters, self.bias, CHAR_WIDTH)?;
        g.max_over_time(conv)
    }
}
