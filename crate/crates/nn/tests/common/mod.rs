#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use tagbench_core::corpus::{Corpus, EmbeddingTable, Sentence};

const TRAIN: &[(&str, &str)] = &[
    ("show flights from boston to denver", "O O O B-from O B-to"),
    ("flights from dallas to atlanta on monday", "O O B-from O B-to O B-day"),
    ("list flights to new york from denver", "O O O B-to I-to O B-from"),
    ("cheapest fare from atlanta to boston", "B-cost O O B-from O B-to"),
    ("i want a flight to dallas", "O O O O O B-to"),
    ("flights leaving boston on friday", "O O B-from O B-day"),
    ("what is the cheapest flight to new york", "O O O B-cost O O B-to I-to"),
    ("from denver to dallas on sunday please", "O B-from O B-to O B-day O"),
    ("show me fares from new york", "O O O O B-from I-from"),
    ("atlanta to boston on monday", "B-from O B-to O B-day"),
];

const TEST: &[(&str, &str)] = &[
    ("flights from boston to dallas", "O O B-from O B-to"),
    ("cheapest flight from denver on friday", "B-cost O O B-from O B-day"),
    ("show flights to atlanta from new york", "O O O B-to O B-from I-from"),
];

fn sentences(rows: &[(&str, &str)]) -> Vec<Sentence> {
    rows.iter()
        .map(|(w, t)| {
            let w: Vec<&str> = w.split(' ').collect();
            let t: Vec<&str> = t.split(' ').collect();
            Sentence::from_pairs(&w, &t).unwrap()
        })
        .collect()
}

pub fn toy_corpus() -> Corpus {
    Corpus::new(sentences(TRAIN), sentences(TEST)).0
}

/// Deterministic 6-dimensional vectors for most training words.
pub fn toy_embeddings() -> EmbeddingTable {
    let corpus = toy_corpus();
    let mut vectors = HashMap::new();
    let mut missing = BTreeSet::new();
    for (k, key) in corpus.train_keys().into_iter().enumerate() {
        if k % 5 == 4 {
            missing.insert(key);
            continue;
        }
        let v = (0..6).map(|j| (((k * 7 + j * 3) % 11) as f64 - 5.0) / 10.0).collect();
        vectors.insert(key, v);
    }
    EmbeddingTable {
        dimension: 6,
        vectors,
        missing,
    }
}
