//! Linear-chain CRF with template features, exact forward-backward training
//! under an L2 penalty, and Viterbi decoding.

pub mod features;
pub mod lattice;
pub mod lbfgs;

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EmbeddingTable, Sentence};
pub use features::{apply_templates, parse_templates, FeatureTemplate, TemplateKind};
pub use lattice::Lattice;
use lbfgs::{Lbfgs, Stop};

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("optimization error: {0}")]
    Optimization(String),
    #[error("empty training split")]
    EmptyTrainingSet,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CrfError>;

/// Dense string <-> id bijection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Interner {
    items: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Interner {
    fn from(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Interner { items, index }
    }
}

impl From<Interner> for Vec<String> {
    fn from(i: Interner) -> Self {
        i.items
    }
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.index.get(s) {
            return id;
        }
        let id = self.items.len() as u32;
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<u32> {
        self.index.get(s).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.items[id as usize]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(String::as_str)
    }
}

/// A sentence with features resolved to ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<Vec<(u32, f64)>>,
    pub labels: Vec<u32>,
}

/// Weight layout: `n_features * n_labels` unary weights (feature-major),
/// then `n_labels * n_labels` transition weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfModel {
    pub labels: Interner,
    pub features: Interner,
    pub weights: Vec<f64>,
    pub templates: Vec<FeatureTemplate>,
    pub l2: f64,
    /// Vectors consulted by embedding-window templates.
    pub embeddings: Option<EmbeddingTable>,
}

const FORMAT: &str = "tagbench-crf";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

impl CrfModel {
    /// All-zero model over the given inventories.
    pub fn zeros(labels: Interner, features: Interner, templates: Vec<FeatureTemplate>, l2: f64) -> Self {
        let n = features.len() * labels.len() + labels.len() * labels.len();
        CrfModel {
            labels,
            features,
            weights: vec![0.0; n],
            templates,
            l2,
            embeddings: None,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn unary_weights(&self) -> &[f64] {
        &self.weights[..self.n_features() * self.n_labels()]
    }

    pub fn transition_weights(&self) -> &[f64] {
        &self.weights[self.n_features() * self.n_labels()..]
    }

    /// Resolves template features against the model's index; unknown
    /// features are dropped and unknown gold labels map to id 0.
    pub fn instance(&self, sentence: &Sentence) -> Result<Instance> {
        let mut features = Vec::with_capacity(sentence.len());
        for i in 0..sentence.len() {
            let f = apply_templates(sentence, i, &self.templates, self.embeddings.as_ref())?;
            features.push(
                f.into_iter()
                    .filter_map(|(k, v)| self.features.get(&k).map(|id| (id, v)))
                    .collect(),
            );
        }
        let labels = sentence.tags.iter().map(|t| self.labels.get(t).unwrap_or(0)).collect();
        Ok(Instance { features, labels })
    }

    pub fn lattice(&self, inst: &Instance) -> Lattice {
        lattice_for(&self.weights, inst, self.n_features(), self.n_labels())
    }

    pub fn objective(&self, batch: &[Instance]) -> Result<(f64, Vec<f64>)> {
        objective(&self.weights, batch, self.n_features(), self.n_labels(), self.l2)
    }

    pub fn viterbi_decode(&self, sentence: &Sentence) -> Result<Vec<String>> {
        let inst = self.instance(sentence)?;
        let (path, _) = self.lattice(&inst).viterbi();
        Ok(path.into_iter().map(|y| self.labels.name(y as u32).to_string()).collect())
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let env = Envelope {
            format: FORMAT.into(),
            version: VERSION,
            model: self,
        };
        serde_json::to_writer(out, &env).map_err(|e| CrfError::Format(e.to_string()))
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let env: Envelope<CrfModel> =
            serde_json::from_reader(input).map_err(|e| CrfError::Format(e.to_string()))?;
        if env.format != FORMAT || env.version != VERSION {
            return Err(CrfError::Format(format!(
                "unsupported model {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.model)
    }
}

pub fn lattice_for(weights: &[f64], inst: &Instance, nf: usize, nl: usize) -> Lattice {
    let n = inst.features.len();
    let mut unary = vec![0.0; n * nl];
    for (i, feats) in inst.features.iter().enumerate() {
        let row = &mut unary[i * nl..(i + 1) * nl];
        for &(f, v) in feats {
            let w = &weights[f as usize * nl..(f as usize + 1) * nl];
            for (r, wy) in row.iter_mut().zip(w) {
                *r += v * wy;
            }
        }
    }
    Lattice::new(n, nl, unary, weights[nf * nl..].to_vec())
}

/// Negative log-likelihood of one instance plus gradient contributions added
/// into `grad`.
fn instance_nll(weights: &[f64], inst: &Instance, nf: usize, nl: usize, grad: &mut [f64]) -> Result<f64> {
    let lat = lattice_for(weights, inst, nf, nl);
    let (node, pair, log_z) = lat.marginals()?;
    let path: Vec<usize> = inst.labels.iter().map(|&y| y as usize).collect();
    let nll = log_z - lat.path_score(&path);
    if !nll.is_finite() {
        return Err(CrfError::Numeric(format!("non-finite likelihood {nll}")));
    }
    for (i, feats) in inst.features.iter().enumerate() {
        for &(f, v) in feats {
            let g = &mut grad[f as usize * nl..(f as usize + 1) * nl];
            for y in 0..nl {
                g[y] += v * node[i * nl + y];
            }
            g[path[i]] -= v;
        }
    }
    let tg = &mut grad[nf * nl..];
    for (t, p) in tg.iter_mut().zip(&pair) {
        *t += p;
    }
    for w in path.windows(2) {
        tg[w[0] * nl + w[1]] -= 1.0;
    }
    Ok(nll)
}

/// Instances per objective work unit. Chunking depends only on the batch, so
/// the summation order is the same for any thread count.
const CHUNK: usize = 256;

/// Regularized NLL `sum_s -log p(y_s | x_s) + l2/2 |w|^2` and its gradient.
pub fn objective(weights: &[f64], batch: &[Instance], nf: usize, nl: usize, l2: f64) -> Result<(f64, Vec<f64>)> {
    let parts: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; weights.len()];
            let mut v = 0.0;
            for inst in chunk {
                v += instance_nll(weights, inst, nf, nl, &mut g)?;
            }
            Ok((v, g))
        })
        .collect();
    let mut parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    // pairwise reduction in index order
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some((va, mut ga)) = it.next() {
            if let Some((vb, gb)) = it.next() {
                for (a, b) in ga.iter_mut().zip(&gb) {
                    *a += b;
                }
                next.push((va + vb, ga));
            } else {
                next.push((va, ga));
            }
        }
        parts = next;
    }
    let (mut value, mut grad) = parts.pop().unwrap_or_else(|| (0.0, vec![0.0; weights.len()]));
    if l2 > 0.0 {
        let mut sq = 0.0;
        for (g, w) in grad.iter_mut().zip(weights) {
            *g += l2 * w;
            sq += w * w;
        }
        value += 0.5 * l2 * sq;
    }
    if !value.is_finite() {
        return Err(CrfError::Numeric(format!("objective is {value}")));
    }
    Ok((value, grad))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Features seen fewer times than this in training are dropped.
    pub min_feature_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1.0,
            max_iterations: 100,
            tolerance: 1e-5,
            min_feature_count: 1,
        }
    }
}

/// Trains from the all-zero initialization with full-batch L-BFGS.
///
/// Labels are indexed in sorted order and features in first-seen order, so
/// training is deterministic.
pub fn train(
    train: &[Sentence],
    templates: &[FeatureTemplate],
    config: &TrainConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<CrfModel> {
    if train.is_empty() {
        return Err(CrfError::EmptyTrainingSet);
    }
    for t in templates {
        t.validate()?;
    }
    let label_set: BTreeSet<&str> = train.iter().flat_map(|s| s.tags.iter().map(String::as_str)).collect();
    let mut labels = Interner::default();
    for l in label_set {
        labels.intern(l);
    }

    let mut raw = Vec::with_capacity(train.len());
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for s in train {
        let mut per_pos = Vec::with_capacity(s.len());
        for i in 0..s.len() {
            let f = apply_templates(s, i, templates, embeddings)?;
            for (k, _) in &f {
                let c = counts.entry(k.clone()).or_insert(0);
                if *c == 0 {
                    order.push(k.clone());
                }
                *c += 1;
            }
            per_pos.push(f);
        }
        raw.push(per_pos);
    }
    let mut features = Interner::default();
    for k in &order {
        if counts[k] >= config.min_feature_count {
            features.intern(k);
        }
    }

    let mut model = CrfModel::zeros(labels, features, templates.to_vec(), config.l2);
    model.embeddings = embeddings.cloned();
    let instances: Vec<Instance> = raw
        .into_iter()
        .zip(train)
        .map(|(per_pos, s)| Instance {
            features: per_pos
                .into_iter()
                .map(|f| {
                    f.into_iter()
                        .filter_map(|(k, v)| model.features.get(&k).map(|id| (id, v)))
                        .collect()
                })
                .collect(),
            labels: s.tags.iter().map(|t| model.labels.get(t).expect("label indexed")).collect(),
        })
        .collect();

    let (nf, nl) = (model.n_features(), model.n_labels());
    let opt = Lbfgs {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        ..Lbfgs::default()
    };
    let outcome = opt.minimize(model.weights.clone(), |w| objective(w, &instances, nf, nl, config.l2))?;
    log::info!(
        "crf: {} iterations, objective {:.4}, stop {:?}",
        outcome.iterations,
        outcome.value,
        outcome.stop
    );
    if outcome.stop == Stop::NoProgress && outcome.iterations == 0 {
        return Err(CrfError::Optimization("line search failed at the initial point".into()));
    }
    model.weights = outcome.x;
    Ok(model)
}
