//! Seeded mini-batch training with Adam, dropout and embedding max-norm.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tagbench_core::corpus::{Corpus, EmbeddingTable, Sentence};
use tagbench_core::eval::{score, EvalReport};

use crate::arch::{build_charset, build_tagger, build_vocab, ArchitectureConfig, Encoded, NeuralTagger};
use crate::graph::{Grads, Graph, ParamStore};
use crate::tensor::Tensor;
use crate::NnError;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros = || store.ids().map(|i| Tensor::zeros(store.get(i).shape())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update of every trainable parameter.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for id in store.ids() {
            if !store.is_trainable(id) {
                continue;
            }
            let g = grads.get(id).data();
            let m = self.m[id].data_mut();
            let v = self.v[id].data_mut();
            let w = store.get_mut(id).data_mut();
            for k in 0..w.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                w[k] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Rescales every row of `matrix` whose L2 norm exceeds `max_norm`.
pub fn apply_max_norm(matrix: &mut Tensor, max_norm: f64) {
    for i in 0..matrix.rows() {
        let row = matrix.row_mut(i);
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > max_norm {
            let c = max_norm / n;
            row.iter_mut().for_each(|x| *x *= c);
        }
    }
}

pub fn evaluate(tagger: &NeuralTagger, sentences: &[Sentence]) -> Result<EvalReport, NnError> {
    let gold: Vec<&[String]> = sentences.iter().map(|s| s.tags.as_slice()).collect();
    let pred = sentences.iter().map(|s| tagger.tag(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(score(&gold, &pred)?)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub tagger: NeuralTagger,
    /// Test F1 (percent) after each epoch.
    pub f1_trace: Vec<f64>,
    /// Mean training loss per sentence for each epoch.
    pub loss_trace: Vec<f64>,
}

/// Batches of same-length sentences, in shuffled order.
fn batches(lengths: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for i in order {
        if cur.len() == batch_size || cur.last().is_some_and(|&j| lengths[j] != lengths[i]) {
            out.push(std::mem::take(&mut cur));
        }
        cur.push(i);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.shuffle(rng);
    out
}

/// Trains one model. Initialization, shuffling and dropout all draw from a
/// single generator seeded with `config.seed`, so a run is reproducible bit
/// for bit.
pub fn train_run(
    config: &ArchitectureConfig,
    corpus: &Corpus,
    embeddings: Option<&EmbeddingTable>,
) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    if corpus.train.is_empty() {
        return Err(NnError::Data("empty training split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = build_vocab(&corpus.train, embeddings);
    let chars = build_charset(&corpus.train);
    let labels: Vec<String> = corpus.tag_inventory.iter().cloned().collect();
    let mut tagger = build_tagger(config, &vocab, &chars, &labels, embeddings, &mut rng)?;
    log::info!(
        "{}: {} trainable parameters, {} words, {} labels",
        config.kind,
        tagger.num_parameters(),
        vocab.len(),
        labels.len()
    );

    let data: Vec<(Encoded, Vec<usize>)> = corpus
        .train
        .iter()
        .map(|s| {
            let gold = tagger.label_ids(&s.tags).into_iter().map(|y| y.expect("train label indexed")).collect();
            (tagger.encode(s), gold)
        })
        .collect();
    let lengths: Vec<usize> = data.iter().map(|d| d.1.len()).collect();
    let emb_params = tagger.embedding_params();
    for &p in &emb_params {
        apply_max_norm(tagger.store.get_mut(p), config.emb_norm);
    }

    let mut adam = Adam::new(&tagger.store, config.lr);
    let mut grads = Grads::zeros_like(&tagger.store);
    let mut f1_trace = Vec::with_capacity(config.epochs);
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for (b, batch) in batches(&lengths, config.batch_size, &mut rng).into_iter().enumerate() {
            grads.clear();
            let mut batch_loss = 0.0;
            for &i in &batch {
                let (enc, gold) = &data[i];
                let mut g = Graph::new(&tagger.store);
                let loss = tagger.loss(&mut g, enc, gold, &mut Some(&mut rng))?;
                let v = g.value(loss).item();
                if !v.is_finite() {
                    let op = g.first_non_finite().unwrap_or_default();
                    return Err(NnError::Training {
                        epoch,
                        batch: b,
                        detail: format!("loss is {v} (first non-finite value from {op})"),
                    });
                }
                batch_loss += v;
                g.backward(loss, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            if grads.tensors.iter().any(|t| !t.is_finite()) {
                return Err(NnError::Training {
                    epoch,
                    batch: b,
                    detail: "non-finite gradient".into(),
                });
            }
            adam.step(&mut tagger.store, &grads);
            for &p in &emb_params {
                apply_max_norm(tagger.store.get_mut(p), config.emb_norm);
            }
            total += batch_loss;
        }
        let report = evaluate(&tagger, &corpus.test)?;
        let f1 = report.f1_percent();
        log::info!("{} epoch {}: loss {:.4}, test F1 {:.2}", config.kind, epoch + 1, total / data.len() as f64, f1);
        f1_trace.push(f1);
        loss_trace.push(total / data.len() as f64);
    }
    Ok(TrainOutcome {
        tagger,
        f1_trace,
        loss_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_group_equal_lengths() {
        let lengths = [3, 1, 3, 2, 3, 1, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = batches(&lengths, 2, &mut rng);
        let mut seen: Vec<usize> = b.iter().flatten().copied().collect();
        seen.sort();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
        for batch in &b {
            assert!(batch.len() <= 2);
            assert!(batch.iter().all(|&i| lengths[i] == lengths[batch[0]]));
        }
    }

    #[test]
    fn max_norm_rescales_long_rows() {
        let mut m = Tensor::matrix(2, 2, vec![3.0, 4.0, 0.3, 0.4]).unwrap();
        apply_max_norm(&mut m, 1.0);
        assert!((m.data()[0] - 0.6).abs() < 1e-12 && (m.data()[1] - 0.8).abs() < 1e-12);
        assert_eq!(&m.data()[2..], &[0.3, 0.4]);
    }
}
