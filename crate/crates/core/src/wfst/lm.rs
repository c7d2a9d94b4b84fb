//! Interpolated Kneser-Ney n-gram model over tag sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc as Shared;

use serde::{Deserialize, Serialize};

use super::fst::{Fst, FstArc, StateId, SymbolTable, EPSILON};
use super::WfstError;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

pub const DEFAULT_DISCOUNT: f64 = 0.75;

type History = Vec<String>;

/// Conditional distribution for one history, stored as natural logs.
///
/// `probs` holds the interpolated probability of every word seen after the
/// history; any other word costs `backoff` plus its probability under the
/// history with the oldest label dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub probs: BTreeMap<String, f64>,
    pub backoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramLm {
    pub order: usize,
    pub discount: f64,
    /// Predictable words: every training label plus the end marker.
    pub vocab: BTreeSet<String>,
    #[serde(with = "history_map")]
    pub contexts: BTreeMap<History, Context>,
}

mod history_map {
    use super::{Context, History};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<History, Context>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<History, Context>, D::Error> {
        Ok(Vec::<(History, Context)>::deserialize(d)?.into_iter().collect())
    }
}

/// Trains an interpolated Kneser-Ney model with a single absolute discount.
///
/// Every sequence is wrapped in `<s>` .. `</s>`. The highest order uses raw
/// counts; lower orders use continuation counts (number of distinct left
/// extensions), except for n-grams starting with `<s>`, which keep raw counts.
/// The unigram level is the undiscounted continuation distribution.
pub fn train_concept_lm<S: AsRef<str>>(
    sequences: &[Vec<S>],
    order: usize,
    discount: f64,
) -> Result<NgramLm, WfstError> {
    if order < 1 {
        return Err(WfstError::Parameter(format!("order must be >= 1, got {order}")));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(WfstError::Parameter(format!("discount must lie in (0, 1), got {discount}")));
    }
    if sequences.is_empty() {
        return Err(WfstError::Parameter("no training sequences".into()));
    }

    // raw[k-1]: counts of k-grams
    let mut raw: Vec<BTreeMap<Vec<String>, f64>> = vec![BTreeMap::new(); order];
    let mut vocab = BTreeSet::new();
    for seq in sequences {
        let mut padded = Vec::with_capacity(seq.len() + 2);
        padded.push(BOS.to_string());
        padded.extend(seq.iter().map(|s| s.as_ref().to_string()));
        padded.push(EOS.to_string());
        for j in 1..padded.len() {
            vocab.insert(padded[j].clone());
            for k in 1..=order.min(j + 1) {
                let gram = padded[j + 1 - k..=j].to_vec();
                *raw[k - 1].entry(gram).or_insert(0.0) += 1.0;
            }
        }
    }

    let mut adjusted: Vec<BTreeMap<Vec<String>, f64>> = vec![BTreeMap::new(); order];
    adjusted[order - 1] = raw[order - 1].clone();
    for k in (1..order).rev() {
        let mut cont: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        for gram in raw[k].keys() {
            *cont.entry(gram[1..].to_vec()).or_insert(0.0) += 1.0;
        }
        for (gram, &c) in &raw[k - 1] {
            let v = if gram[0] == BOS {
                c
            } else {
                cont.get(gram).copied().unwrap_or(0.0)
            };
            if v > 0.0 {
                adjusted[k - 1].insert(gram.clone(), v);
            }
        }
    }

    let mut lm = NgramLm {
        order,
        discount,
        vocab,
        contexts: BTreeMap::new(),
    };

    for k in 1..=order {
        // history -> [(word, adjusted count)]
        let mut groups: BTreeMap<History, Vec<(String, f64)>> = BTreeMap::new();
        for (gram, &c) in &adjusted[k - 1] {
            let (h, w) = gram.split_at(k - 1);
            groups.entry(h.to_vec()).or_default().push((w[0].clone(), c));
        }
        for (h, followers) in groups {
            let total: f64 = followers.iter().map(|f| f.1).sum();
            let mut probs = BTreeMap::new();
            let ctx = if k == 1 {
                for (w, c) in followers {
                    probs.insert(w, (c / total).ln());
                }
                Context { probs, backoff: 0.0 }
            } else {
                let gamma = discount * followers.len() as f64 / total;
                let lower = &h[1..];
                for (w, c) in followers {
                    let p = (c - discount).max(0.0) / total + gamma * lm.logprob(lower, &w).exp();
                    probs.insert(w, p.ln());
                }
                Context {
                    probs,
                    backoff: gamma.ln(),
                }
            };
            lm.contexts.insert(h, ctx);
        }
    }
    Ok(lm)
}

impl NgramLm {
    /// Natural-log probability of `word` after `history` (only the last
    /// `order - 1` labels matter). Unknown words get `-inf`.
    pub fn logprob<S: AsRef<str>>(&self, history: &[S], word: &str) -> f64 {
        let keep = history.len().min(self.order - 1);
        let h: History = history[history.len() - keep..]
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        self.logprob_inner(&h, word)
    }

    fn logprob_inner(&self, h: &[String], word: &str) -> f64 {
        match self.contexts.get(h) {
            Some(ctx) => match ctx.probs.get(word) {
                Some(&lp) => lp,
                None if h.is_empty() => f64::NEG_INFINITY,
                None => ctx.backoff + self.logprob_inner(&h[1..], word),
            },
            None if h.is_empty() => f64::NEG_INFINITY,
            None => self.logprob_inner(&h[1..], word),
        }
    }

    /// Log-probability of a whole tag sequence, end marker included.
    pub fn score_sequence<S: AsRef<str>>(&self, seq: &[S]) -> f64 {
        let mut hist = vec![BOS.to_string()];
        let mut total = 0.0;
        for w in seq.iter().map(|s| s.as_ref()).chain(std::iter::once(EOS)) {
            total += self.logprob(&hist, w);
            hist.push(w.to_string());
        }
        total
    }

    /// Largest |sum_w P(w|h) - 1| over stored histories.
    pub fn normalization_error(&self) -> f64 {
        self.contexts
            .keys()
            .map(|h| {
                let s: f64 = self.vocab.iter().map(|w| self.logprob_inner(h, w).exp()).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// ARPA-format text with log10 values.
    pub fn to_arpa(&self) -> String {
        let mut by_order: Vec<Vec<(Vec<String>, f64)>> = vec![Vec::new(); self.order];
        for (h, ctx) in &self.contexts {
            for (w, &lp) in &ctx.probs {
                let mut g = h.clone();
                g.push(w.clone());
                by_order[h.len()].push((g, lp));
            }
        }
        if self.order > 1 && self.contexts.contains_key(&vec![BOS.to_string()]) {
            by_order[0].push((vec![BOS.to_string()], f64::NEG_INFINITY));
            by_order[0].sort_by(|a, b| a.0.cmp(&b.0));
        }
        let log10 = |x: f64| if x.is_finite() { x / std::f64::consts::LN_10 } else { -99.0 };
        let mut out = String::from("\n\\data\\\n");
        for (k, grams) in by_order.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, grams.len());
        }
        for (k, grams) in by_order.iter().enumerate() {
            let _ = writeln!(out, "\n\\{}-grams:", k + 1);
            for (g, lp) in grams {
                let _ = write!(out, "{:.6}\t{}", log10(*lp), g.join(" "));
                if let Some(ctx) = self.contexts.get(g) {
                    if k + 1 < self.order {
                        let _ = write!(out, "\t{:.6}", log10(ctx.backoff));
                    }
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    /// Deterministic backoff acceptor over `symbols`.
    ///
    /// One state per stored history. Seen words become arcs to the state of
    /// the longest stored suffix of the extended history; the end marker
    /// becomes a final weight; backoff is an epsilon arc to the shortened
    /// history. Epsilon arcs stand in for failure arcs, so a path may back off
    /// even where a direct arc exists.
    pub fn to_acceptor(&self, symbols: Shared<SymbolTable>) -> Result<Fst, WfstError> {
        let mut fst = Fst::new(symbols.clone(), symbols.clone());
        let mut state: BTreeMap<&History, StateId> = BTreeMap::new();
        for h in self.contexts.keys() {
            state.insert(h, fst.add_state());
        }
        let start_hist: History = if self.order > 1 {
            vec![BOS.to_string()]
        } else {
            Vec::new()
        };
        let start = *state
            .get(&start_hist)
            .ok_or_else(|| WfstError::Invalid("model has no start context".into()))?;
        fst.set_initial(start);

        for (h, ctx) in &self.contexts {
            let s = state[h];
            for (w, &lp) in &ctx.probs {
                if w == EOS {
                    fst.set_final(s, -lp);
                    continue;
                }
                let label = symbols
                    .find(w)
                    .ok_or_else(|| WfstError::UnknownSymbol(w.clone()))?;
                let next = state[&self.next_history(h, w)];
                fst.add_arc(
                    s,
                    FstArc {
                        ilabel: label,
                        olabel: label,
                        weight: -lp,
                        next,
                    },
                );
            }
            if !h.is_empty() {
                let lower = h[1..].to_vec();
                let next = *state
                    .get(&lower)
                    .ok_or_else(|| WfstError::Invalid(format!("missing suffix history {lower:?}")))?;
                fst.add_arc(
                    s,
                    FstArc {
                        ilabel: EPSILON,
                        olabel: EPSILON,
                        weight: -ctx.backoff,
                        next,
                    },
                );
            }
        }
        fst.arc_sort_input();
        Ok(fst)
    }

    /// Longest stored suffix of `h + [w]` of at most `order - 1` labels.
    pub fn next_history(&self, h: &[String], w: &str) -> History {
        let mut ext: History = h.to_vec();
        ext.push(w.to_string());
        let keep = ext.len().min(self.order - 1);
        let mut ext = ext.split_off(ext.len() - keep);
        while !ext.is_empty() && !self.contexts.contains_key(&ext) {
            ext.remove(0);
        }
        ext
    }
}
