//! Finite-difference check of a whole tagger's loss on a small built-in
//! dataset, with dropout off.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tagbench_core::corpus::Sentence;
use tagbench_nn::arch::{build_charset, build_vocab};
use tagbench_nn::{build_tagger, grad_check, ArchitectureConfig, ArchitectureKind};

use crate::BenchError;

const SENTENCES: [(&str, &str); 4] = [
    ("flights from boston to denver", "O O B-from O B-to"),
    ("show flights to new york on monday", "O O O B-to I-to O B-day"),
    ("cheapest fare from dallas", "B-cost O O B-from"),
    ("to atlanta", "O B-to"),
];

fn sentences() -> Vec<Sentence> {
    SENTENCES
        .iter()
        .map(|(w, t)| {
            let w: Vec<&str> = w.split(' ').collect();
            let t: Vec<&str> = t.split(' ').collect();
            Sentence::from_pairs(&w, &t).expect("built-in sentence")
        })
        .collect()
}

/// Maximum relative error between the analytic and the central-difference
/// gradient over `points` random coordinates, for one sentence per call.
pub fn check_architecture(kind: ArchitectureKind, points: usize, step: f64, seed: u64) -> Result<f64, BenchError> {
    let err = |e: tagbench_nn::NnError| BenchError::Model(format!("{kind}: {e}"));
    let train = sentences();
    let mut config = ArchitectureConfig::new(kind, 8);
    config.word_dim = 6;
    config.char_dim = 5;
    config.label_dim = 4;
    let mut labels: Vec<String> = train.iter().flat_map(|s| s.tags.clone()).collect();
    labels.sort();
    labels.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tagger = build_tagger(
        &config,
        &build_vocab(&train, None),
        &build_charset(&train),
        &labels,
        None,
        &mut rng,
    )
    .map_err(err)?;
    let mut worst: f64 = 0.0;
    for s in &train {
        let enc = tagger.encode(s);
        let gold: Vec<usize> = tagger.label_ids(&s.tags).into_iter().map(|y| y.expect("label")).collect();
        let e = grad_check(&tagger.store, &[], points, step, &mut rng, |g| tagger.loss(g, &enc, &gold, &mut None))
            .map_err(err)?;
        worst = worst.max(e);
    }
    Ok(worst)
}
