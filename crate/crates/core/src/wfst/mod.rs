//! Generative tagger: a word-to-concept emission transducer composed with an
//! n-gram model over concept tags, decoded by tropical shortest path.

pub mod fst;
pub mod lm;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc as Shared;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
pub use fst::{compose, shortest_path, BestPath, Fst, FstArc, Label, StateId, SymbolTable, EPSILON};
pub use lm::{train_concept_lm, NgramLm, DEFAULT_DISCOUNT};

/// Input symbol standing for any word not seen in training.
pub const UNKNOWN_WORD: &str = "<unk>";

#[derive(Debug, Error)]
pub enum WfstError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid transducer: {0}")]
    Invalid(String),
    #[error("symbol tables of composed machines do not match")]
    SymbolMismatch,
    #[error("symbol {0:?} missing from the symbol table")]
    UnknownSymbol(String),
    #[error("negative-weight cycle reachable from the start state")]
    NegativeCycle,
    #[error("no emission counts")]
    EmptyCounts,
    #[error("internal decoding error: {0}")]
    Internal(String),
}

/// Single-state transducer scoring `word -> concept` with `-ln P(word|concept)`,
/// plus one `<unk> -> concept` arc per concept costing `ln |inventory|`.
pub fn build_emission_fst(
    pair_counts: &BTreeMap<(String, String), f64>,
    concept_inventory: &BTreeSet<String>,
) -> Result<Fst, WfstError> {
    if pair_counts.is_empty() {
        return Err(WfstError::EmptyCounts);
    }
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    let mut words = BTreeSet::new();
    for ((w, c), &n) in pair_counts {
        if !(n > 0.0) {
            return Err(WfstError::Parameter(format!("count for ({w}, {c}) is not positive")));
        }
        if !concept_inventory.contains(c) {
            return Err(WfstError::Parameter(format!("concept {c:?} missing from inventory")));
        }
        *totals.entry(c.as_str()).or_insert(0.0) += n;
        words.insert(w.as_str());
    }
    let mut isyms = SymbolTable::from_symbols(words);
    let unk = isyms.add(UNKNOWN_WORD);
    let osyms = SymbolTable::from_symbols(concept_inventory);
    let isyms = Shared::new(isyms);
    let osyms = Shared::new(osyms);

    let mut fst = Fst::new(isyms.clone(), osyms.clone());
    let s = fst.add_state();
    fst.set_initial(s);
    fst.set_final(s, 0.0);
    for ((w, c), &n) in pair_counts {
        fst.add_arc(
            s,
            FstArc {
                ilabel: isyms.find(w).expect("word added above"),
                olabel: osyms.find(c).expect("concept checked above"),
                weight: -(n / totals[c.as_str()]).ln(),
                next: s,
            },
        );
    }
    let uniform = (concept_inventory.len() as f64).ln();
    for c in concept_inventory {
        fst.add_arc(
            s,
            FstArc {
                ilabel: unk,
                olabel: osyms.find(c).expect("inventory symbol"),
                weight: uniform,
                next: s,
            },
        );
    }
    fst.arc_sort_input();
    Ok(fst)
}

/// Tags a sentence with the minimum-cost path through
/// `sentence ∘ emission ∘ lm_acceptor`. Unseen words map to `<unk>`.
pub fn decode(sentence: &Sentence, emission: &Fst, lm_acceptor: &Fst) -> Result<(Vec<String>, f64), WfstError> {
    let unk = emission
        .isyms
        .find(UNKNOWN_WORD)
        .ok_or_else(|| WfstError::UnknownSymbol(UNKNOWN_WORD.into()))?;
    let labels: Vec<Label> = sentence
        .tokens
        .iter()
        .map(|t| emission.isyms.find(&t.key()).unwrap_or(unk))
        .collect();
    let input = Fst::linear_acceptor(&labels, emission.isyms.clone());
    let lattice = compose(&input, emission)?;
    let full = compose(&lattice, lm_acceptor)?;
    let best = shortest_path(&full)?
        .ok_or_else(|| WfstError::Internal("no accepting path".into()))?;
    if best.olabels.len() != sentence.len() {
        return Err(WfstError::Internal(format!(
            "decoded {} labels for {} words",
            best.olabels.len(),
            sentence.len()
        )));
    }
    let tags = best
        .olabels
        .iter()
        .map(|&l| lm_acceptor.osyms.symbol(l).unwrap_or("O").to_string())
        .collect();
    Ok((tags, best.cost))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WfstTagger {
    pub emission: Fst,
    pub lm: NgramLm,
    pub lm_acceptor: Fst,
}

impl WfstTagger {
    /// Estimates emission counts over lookup keys and a concept n-gram model
    /// over the full IOB tags.
    pub fn train(train: &[Sentence], order: usize, discount: f64) -> Result<Self, WfstError> {
        let mut counts: BTreeMap<(String, String), f64> = BTreeMap::new();
        let mut inventory = BTreeSet::new();
        for s in train {
            for (t, tag) in s.tokens.iter().zip(&s.tags) {
                *counts.entry((t.key(), tag.clone())).or_insert(0.0) += 1.0;
                inventory.insert(tag.clone());
            }
        }
        let emission = build_emission_fst(&counts, &inventory)?;
        let tag_seqs: Vec<Vec<String>> = train.iter().map(|s| s.tags.clone()).collect();
        let lm = train_concept_lm(&tag_seqs, order, discount)?;
        let lm_acceptor = lm.to_acceptor(emission.osyms.clone())?;
        Ok(WfstTagger {
            emission,
            lm,
            lm_acceptor,
        })
    }

    pub fn tag(&self, sentence: &Sentence) -> Result<Vec<String>, WfstError> {
        decode(sentence, &self.emission, &self.lm_acceptor).map(|r| r.0)
    }
}
