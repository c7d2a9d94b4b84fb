//! Weighted transducers over the tropical semiring (min, +).

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc as Shared;

use serde::{Deserialize, Serialize};

use super::WfstError;

pub type StateId = usize;
pub type Label = u32;

pub const EPSILON: Label = 0;
pub const EPSILON_SYMBOL: &str = "<eps>";

/// String <-> id mapping; id 0 is always epsilon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, Label>,
}

impl From<Vec<String>> for SymbolTable {
    fn from(symbols: Vec<String>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as Label))
            .collect();
        SymbolTable { symbols, index }
    }
}

impl From<SymbolTable> for Vec<String> {
    fn from(t: SymbolTable) -> Self {
        t.symbols
    }
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut t = SymbolTable {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        t.add(EPSILON_SYMBOL);
        t
    }

    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut t = Self::new();
        for s in symbols {
            t.add(s.as_ref());
        }
        t
    }

    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as Label;
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), id);
        id
    }

    pub fn find(&self, symbol: &str) -> Option<Label> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: Label) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    /// Number of symbols including epsilon.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FstArc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: f64,
    pub next: StateId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fst {
    arcs: Vec<Vec<FstArc>>,
    finals: Vec<Option<f64>>,
    initial: Option<StateId>,
    pub isyms: Shared<SymbolTable>,
    pub osyms: Shared<SymbolTable>,
}

impl Fst {
    pub fn new(isyms: Shared<SymbolTable>, osyms: Shared<SymbolTable>) -> Self {
        Fst {
            arcs: Vec::new(),
            finals: Vec::new(),
            initial: None,
            isyms,
            osyms,
        }
    }

    pub fn add_state(&mut self) -> StateId {
        self.arcs.push(Vec::new());
        self.finals.push(None);
        self.arcs.len() - 1
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.initial = Some(s);
    }

    pub fn initial(&self) -> Option<StateId> {
        self.initial
    }

    pub fn set_final(&mut self, s: StateId, weight: f64) {
        self.finals[s] = Some(weight);
    }

    pub fn final_weight(&self, s: StateId) -> Option<f64> {
        self.finals[s]
    }

    pub fn add_arc(&mut self, from: StateId, arc: FstArc) {
        self.arcs[from].push(arc);
    }

    pub fn arcs(&self, s: StateId) -> &[FstArc] {
        &self.arcs[s]
    }

    pub fn num_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.arcs.len()
    }

    /// Sorts every state's arcs by input label (stable, so ties keep insertion order).
    pub fn arc_sort_input(&mut self) {
        for a in &mut self.arcs {
            a.sort_by_key(|a| a.ilabel);
        }
    }

    fn is_input_sorted(&self) -> bool {
        self.arcs
            .iter()
            .all(|a| a.windows(2).all(|w| w[0].ilabel <= w[1].ilabel))
    }

    /// Checks arc targets, finiteness of weights and that some final state is
    /// reachable from the initial one.
    pub fn validate(&self) -> Result<(), WfstError> {
        let n = self.num_states();
        let init = self
            .initial
            .filter(|&s| s < n)
            .ok_or_else(|| WfstError::Invalid("missing initial state".into()))?;
        for (s, arcs) in self.arcs.iter().enumerate() {
            for a in arcs {
                if a.next >= n {
                    return Err(WfstError::Invalid(format!("arc from {s} to missing state {}", a.next)));
                }
                if !a.weight.is_finite() {
                    return Err(WfstError::Invalid(format!("non-finite weight on arc from {s}")));
                }
            }
            if let Some(w) = self.finals[s] {
                if !w.is_finite() {
                    return Err(WfstError::Invalid(format!("non-finite final weight at {s}")));
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![init];
        seen[init] = true;
        while let Some(s) = stack.pop() {
            if self.finals[s].is_some() {
                return Ok(());
            }
            for a in &self.arcs[s] {
                if !seen[a.next] {
                    seen[a.next] = true;
                    stack.push(a.next);
                }
            }
        }
        Err(WfstError::Invalid("no final state is reachable".into()))
    }

    /// A linear acceptor for a label string.
    pub fn linear_acceptor(labels: &[Label], syms: Shared<SymbolTable>) -> Fst {
        let mut f = Fst::new(syms.clone(), syms);
        let mut s = f.add_state();
        f.set_initial(s);
        for &l in labels {
            let n = f.add_state();
            f.add_arc(
                s,
                FstArc {
                    ilabel: l,
                    olabel: l,
                    weight: 0.0,
                    next: n,
                },
            );
            s = n;
        }
        f.set_final(s, 0.0);
        f
    }

    /// Text dump: `src dst ilabel olabel weight` per arc, `state weight` per
    /// final state, labels printed as symbols.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut order: Vec<StateId> = self.states().collect();
        if let Some(i) = self.initial {
            order.retain(|&s| s != i);
            order.insert(0, i);
        }
        let sym = |t: &SymbolTable, l: Label| t.symbol(l).map(str::to_string).unwrap_or_else(|| l.to_string());
        for &s in &order {
            for a in &self.arcs[s] {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {}",
                    s,
                    a.next,
                    sym(&self.isyms, a.ilabel),
                    sym(&self.osyms, a.olabel),
                    a.weight
                );
            }
        }
        for &s in &order {
            if let Some(w) = self.finals[s] {
                let _ = writeln!(out, "{s} {w}");
            }
        }
        out
    }
}

fn same_table(a: &Shared<SymbolTable>, b: &Shared<SymbolTable>) -> bool {
    Shared::ptr_eq(a, b) || a.symbols == b.symbols
}

/// Composes two transducers, exploring only states reachable from the start.
///
/// Epsilon outputs of `left` advance `left` alone and epsilon inputs of
/// `right` advance `right` alone. Without an epsilon filter some paths are
/// duplicated, which never changes a tropical shortest distance.
pub fn compose(left: &Fst, right: &Fst) -> Result<Fst, WfstError> {
    if !same_table(&left.osyms, &right.isyms) {
        return Err(WfstError::SymbolMismatch);
    }
    let sorted;
    let right = if right.is_input_sorted() {
        right
    } else {
        let mut r = right.clone();
        r.arc_sort_input();
        sorted = r;
        &sorted
    };
    let mut out = Fst::new(left.isyms.clone(), right.osyms.clone());
    let (Some(li), Some(ri)) = (left.initial, right.initial) else {
        return Err(WfstError::Invalid("operand without initial state".into()));
    };
    let mut ids: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let mut queue = VecDeque::new();
    let start = out.add_state();
    out.set_initial(start);
    ids.insert((li, ri), start);
    queue.push_back((li, ri));

    let mut get = |out: &mut Fst, queue: &mut VecDeque<(StateId, StateId)>, pair| {
        *ids.entry(pair).or_insert_with(|| {
            queue.push_back(pair);
            out.add_state()
        })
    };

    while let Some((ls, rs)) = queue.pop_front() {
        let me = get(&mut out, &mut queue, (ls, rs));
        if let (Some(a), Some(b)) = (left.finals[ls], right.finals[rs]) {
            out.set_final(me, a + b);
        }
        let rarcs = &right.arcs[rs];
        for la in &left.arcs[ls] {
            if la.olabel == EPSILON {
                let n = get(&mut out, &mut queue, (la.next, rs));
                out.add_arc(
                    me,
                    FstArc {
                        ilabel: la.ilabel,
                        olabel: EPSILON,
                        weight: la.weight,
                        next: n,
                    },
                );
                continue;
            }
            let lo = rarcs.partition_point(|a| a.ilabel < la.olabel);
            for ra in rarcs[lo..].iter().take_while(|a| a.ilabel == la.olabel) {
                let n = get(&mut out, &mut queue, (la.next, ra.next));
                out.add_arc(
                    me,
                    FstArc {
                        ilabel: la.ilabel,
                        olabel: ra.olabel,
                        weight: la.weight + ra.weight,
                        next: n,
                    },
                );
            }
        }
        for ra in rarcs.iter().take_while(|a| a.ilabel == EPSILON) {
            let n = get(&mut out, &mut queue, (ls, ra.next));
            out.add_arc(
                me,
                FstArc {
                    ilabel: EPSILON,
                    olabel: ra.olabel,
                    weight: ra.weight,
                    next: n,
                },
            );
        }
    }
    Ok(out)
}

/// Result of a single-best search.
#[derive(Debug, Clone, PartialEq)]
pub struct BestPath {
    pub cost: f64,
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
}

/// Minimum-cost accepting path.
///
/// Acyclic machines are solved by dynamic programming in topological order;
/// cyclic ones by Bellman-Ford. Exactly equal costs are resolved in favour of
/// the lexicographically smaller output-label sequence (epsilons dropped).
pub fn shortest_path(fst: &Fst) -> Result<Option<BestPath>, WfstError> {
    let Some(init) = fst.initial else {
        return Ok(None);
    };
    let n = fst.num_states();
    let mut dist = vec![f64::INFINITY; n];
    let mut back: Vec<Option<(StateId, usize)>> = vec![None; n];
    dist[init] = 0.0;

    let relax = |s: StateId, dist: &mut Vec<f64>, back: &mut Vec<Option<(StateId, usize)>>| -> bool {
        let mut changed = false;
        if !dist[s].is_finite() {
            return false;
        }
        for (k, a) in fst.arcs[s].iter().enumerate() {
            let c = dist[s] + a.weight;
            let better = c < dist[a.next]
                || (c == dist[a.next]
                    && back[a.next].is_some_and(|(ps, pk)| (ps, pk) != (s, k))
                    && output_prefix(fst, &back, s, Some(a.olabel))
                        < output_prefix(fst, back, a.next, None));
            if better {
                dist[a.next] = c;
                back[a.next] = Some((s, k));
                changed = true;
            }
        }
        changed
    };

    match topological_order(fst, init) {
        Some(order) => {
            for s in order {
                relax(s, &mut dist, &mut back);
            }
        }
        None => {
            let mut rounds = 0;
            loop {
                let mut changed = false;
                for s in 0..n {
                    changed |= relax(s, &mut dist, &mut back);
                }
                if !changed {
                    break;
                }
                rounds += 1;
                if rounds > n {
                    return Err(WfstError::NegativeCycle);
                }
            }
        }
    }

    let mut best: Option<(f64, StateId)> = None;
    for s in 0..n {
        let Some(fw) = fst.finals[s] else { continue };
        if !dist[s].is_finite() {
            continue;
        }
        let c = dist[s] + fw;
        let take = match best {
            None => true,
            Some((bc, bs)) => {
                c < bc
                    || (c == bc
                        && output_prefix(fst, &back, s, None) < output_prefix(fst, &back, bs, None))
            }
        };
        if take {
            best = Some((c, s));
        }
    }
    let Some((cost, mut s)) = best else {
        return Ok(None);
    };
    let mut il = Vec::new();
    let mut ol = Vec::new();
    while let Some((p, k)) = back[s] {
        let a = fst.arcs[p][k];
        if a.ilabel != EPSILON {
            il.push(a.ilabel);
        }
        if a.olabel != EPSILON {
            ol.push(a.olabel);
        }
        s = p;
    }
    il.reverse();
    ol.reverse();
    Ok(Some(BestPath {
        cost,
        ilabels: il,
        olabels: ol,
    }))
}

fn output_prefix(
    fst: &Fst,
    back: &[Option<(StateId, usize)>],
    mut s: StateId,
    extra: Option<Label>,
) -> Vec<Label> {
    let mut out: Vec<Label> = extra.into_iter().filter(|&l| l != EPSILON).collect();
    let mut guard = 0;
    while let Some((p, k)) = back[s] {
        let l = fst.arcs[p][k].olabel;
        if l != EPSILON {
            out.push(l);
        }
        s = p;
        guard += 1;
        if guard > back.len() {
            break;
        }
    }
    out.reverse();
    out
}

/// Topological order of the states reachable from `init`, or `None` if a
/// cycle is reachable.
fn topological_order(fst: &Fst, init: StateId) -> Option<Vec<StateId>> {
    let n = fst.num_states();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; n];
    let mut post = Vec::new();
    let mut stack: Vec<(StateId, usize)> = vec![(init, 0)];
    mark[init] = 1;
    while let Some(&mut (s, ref mut k)) = stack.last_mut() {
        if let Some(a) = fst.arcs[s].get(*k) {
            *k += 1;
            match mark[a.next] {
                0 => {
                    mark[a.next] = 1;
                    stack.push((a.next, 0));
                }
                1 => return None,
                _ => {}
            }
        } else {
            mark[s] = 2;
            post.push(s);
            stack.pop();
        }
    }
    post.reverse();
    Some(post)
}
