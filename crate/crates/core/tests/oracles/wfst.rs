//! Exhaustive decoding oracle for the WFST tagger and a Kneser-Ney
//! normalization check.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tagbench_core::corpus::Sentence;
use tagbench_core::wfst::{decode, train_concept_lm, NgramLm, WfstTagger};

const BOS: &str = "<s>";
const EOS: &str = "</s>";

/// Longest suffix of `h + [w]` (at most order-1 long) that has a context.
pub fn successor(lm: &NgramLm, h: &[String], w: &str) -> Vec<String> {
    let mut ext: Vec<String> = h.iter().cloned().chain([w.to_string()]).collect();
    while ext.len() > lm.order - 1 || (!ext.is_empty() && !lm.contexts.contains_key(&ext)) {
        ext.remove(0);
    }
    ext
}

/// Cheapest way for the backoff acceptor to read `tags` then finish: at each
/// history any number of backoff steps may be taken before a direct arc.
/// `emit[i]` is added to the arc reading tag `i`; costs accumulate left to
/// right, arc by arc, as along a path of the composed machine.
pub fn path_cost(lm: &NgramLm, tags: &[String], emit: &[f64]) -> f64 {
    let start: Vec<String> = if lm.order > 1 { vec![BOS.into()] } else { vec![] };
    let mut frontier: BTreeMap<Vec<String>, f64> = BTreeMap::from([(start, 0.0)]);
    for (i, w) in tags.iter().map(String::as_str).chain([EOS]).enumerate() {
        let mut next: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        for (h, &c) in &frontier {
            let mut acc = c;
            let mut cur = h.clone();
            loop {
                let ctx = &lm.contexts[&cur];
                if let Some(&lp) = ctx.probs.get(w) {
                    let key = if w == EOS { vec![] } else { successor(lm, &cur, w) };
                    let cand = if w == EOS { acc + -lp } else { acc + (emit[i] + -lp) };
                    let e = next.entry(key).or_insert(f64::INFINITY);
                    if cand < *e {
                        *e = cand;
                    }
                }
                if cur.is_empty() {
                    break;
                }
                acc += -ctx.backoff;
                cur.remove(0);
            }
        }
        frontier = next;
    }
    frontier.values().copied().fold(f64::INFINITY, f64::min)
}

pub fn emission_cost(counts: &HashMap<(String, String), f64>, totals: &HashMap<String, f64>, known: bool, n_tags: usize, w: &str, t: &str) -> f64 {
    if !known {
        return (n_tags as f64).ln();
    }
    match counts.get(&(w.to_string(), t.to_string())) {
        Some(n) => -(n / totals[t]).ln(),
        None => f64::INFINITY,
    }
}

/// One random toy model (at most 4 concepts) and sentence (at most 5 words):
/// the decoded path must cost exactly the exhaustive minimum over all tag
/// sequences.
pub fn decode_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let words = ["flights", "to", "boston", "denver", "monday", "from"];
    let n_concepts = rng.gen_range(1..=4);
    let mut tags = vec!["O".to_string()];
    for c in ["a", "b", "c", "d"].iter().take(n_concepts) {
        tags.push(format!("B-{c}"));
        if rng.gen_bool(0.5) {
            tags.push(format!("I-{c}"));
        }
    }
    let train: Vec<Sentence> = (0..rng.gen_range(3..10))
        .map(|_| {
            let n = rng.gen_range(1..=5);
            let w: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let t: Vec<&str> = (0..n).map(|_| tags[rng.gen_range(0..tags.len())].as_str()).collect();
            Sentence::from_pairs(&w, &t).unwrap()
        })
        .collect();
    let order = rng.gen_range(1..=3);
    let tagger = WfstTagger::train(&train, order, 0.75).map_err(|e| e.to_string())?;

    let mut counts = HashMap::new();
    let mut totals = HashMap::new();
    for s in &train {
        for (t, tag) in s.tokens.iter().zip(&s.tags) {
            *counts.entry((t.surface.clone(), tag.clone())).or_insert(0.0) += 1.0;
            *totals.entry(tag.clone()).or_insert(0.0) += 1.0;
        }
    }
    let inventory: Vec<String> = {
        let mut v: Vec<String> = totals.keys().cloned().collect();
        v.sort();
        v
    };

    let n = rng.gen_range(1..=5);
    let test_words: Vec<&str> = (0..n)
        .map(|_| if rng.gen_bool(0.15) { "zurich" } else { words[rng.gen_range(0..words.len())] })
        .collect();
    let sentence = Sentence::from_pairs(&test_words, &vec!["O"; n]).unwrap();
    let known: Vec<bool> = test_words.iter().map(|w| counts.keys().any(|(x, _)| x == w)).collect();

    let cost_of = |seq: &[String]| -> f64 {
        let emit: Vec<f64> = seq
            .iter()
            .enumerate()
            .map(|(i, t)| emission_cost(&counts, &totals, known[i], inventory.len(), test_words[i], t))
            .collect();
        path_cost(&tagger.lm, seq, &emit)
    };

    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; n];
    loop {
        let seq: Vec<String> = idx.iter().map(|&k| inventory[k].clone()).collect();
        best = best.min(cost_of(&seq));
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < inventory.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }

    let (decoded, reported) = decode(&sentence, &tagger.emission, &tagger.lm_acceptor).map_err(|e| e.to_string())?;
    if cost_of(&decoded) != best || reported != best {
        return Err(format!("{test_words:?}: decoded {decoded:?} at {reported}, exhaustive minimum {best}"));
    }
    Ok(())
}

/// Largest `|sum_w P(w | h) - 1|` over all stored histories of a model of
/// `order` trained on 50 random tag sequences.
pub fn kn_max_deviation(order: usize, rng: &mut ChaCha8Rng) -> f64 {
    let labels = ["O", "B-a", "I-a", "B-b", "I-b", "B-c"];
    let corpus: Vec<Vec<&str>> = (0..50)
        .map(|_| (0..rng.gen_range(1..10)).map(|_| labels[rng.gen_range(0..labels.len())]).collect())
        .collect();
    let lm = train_concept_lm(&corpus, order, 0.75).unwrap();
    lm.contexts
        .keys()
        .map(|h| (lm.vocab.iter().map(|w| lm.logprob(h, w).exp()).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}
