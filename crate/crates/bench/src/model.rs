//! One model file format for all three families, dispatched on the
//! envelope's `format` field.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use tagbench_core::corpus::{Corpus, EmbeddingTable, Sentence};
use tagbench_core::crf::{self, CrfModel};
use tagbench_core::eval::{score, EvalReport};
use tagbench_core::wfst::WfstTagger;
use tagbench_nn::{load_checkpoint, save_checkpoint, train_run, NeuralTagger};

use crate::recipe::ModelSpec;
use crate::BenchError;

const WFST_FORMAT: &str = "tagbench-wfst";
const WFST_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct WfstEnvelope<T> {
    format: String,
    version: u32,
    model: T,
}

#[derive(Deserialize)]
struct Probe {
    format: String,
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Wfst(WfstTagger),
    Crf(CrfModel),
    Neural(NeuralTagger),
}

/// A trained model plus its per-epoch traces.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: TrainedModel,
    pub f1_trace: Vec<f64>,
    pub loss_trace: Vec<f64>,
}

fn model_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::Model(e.to_string())
}

impl TrainedModel {
    pub fn family(&self) -> &'static str {
        match self {
            TrainedModel::Wfst(_) => "wfst",
            TrainedModel::Crf(_) => "crf",
            TrainedModel::Neural(_) => "nn",
        }
    }

    pub fn tag(&self, sentence: &Sentence) -> Result<Vec<String>, BenchError> {
        match self {
            TrainedModel::Wfst(m) => m.tag(sentence).map_err(model_err),
            TrainedModel::Crf(m) => m.viterbi_decode(sentence).map_err(model_err),
            TrainedModel::Neural(m) => m.tag(sentence).map_err(model_err),
        }
    }

    /// Predicted sentences: the input tokens with the model's tags.
    pub fn predict(&self, sentences: &[Sentence]) -> Result<Vec<Sentence>, BenchError> {
        sentences
            .iter()
            .map(|s| {
                Ok(Sentence {
                    tokens: s.tokens.clone(),
                    tags: self.tag(s)?,
                })
            })
            .collect()
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), BenchError> {
        match self {
            TrainedModel::Wfst(m) => {
                let env = WfstEnvelope {
                    format: WFST_FORMAT.to_string(),
                    version: WFST_VERSION,
                    model: m,
                };
                serde_json::to_writer(out, &env).map_err(model_err)
            }
            TrainedModel::Crf(m) => m.save(out).map_err(model_err),
            TrainedModel::Neural(m) => save_checkpoint(m, out).map_err(model_err),
        }
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self, BenchError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(model_err)?;
        let probe: Probe = serde_json::from_slice(&bytes).map_err(|e| model_err(format!("not a model file: {e}")))?;
        match probe.format.as_str() {
            WFST_FORMAT => {
                let env: WfstEnvelope<WfstTagger> = serde_json::from_slice(&bytes).map_err(model_err)?;
                if env.version != WFST_VERSION {
                    return Err(model_err(format!("unsupported model {} v{}", env.format, env.version)));
                }
                Ok(TrainedModel::Wfst(env.model))
            }
            "tagbench-crf" => CrfModel::load(bytes.as_slice()).map(TrainedModel::Crf).map_err(model_err),
            "tagbench-nn" => load_checkpoint(bytes.as_slice()).map(TrainedModel::Neural).map_err(model_err),
            other => Err(model_err(format!("unknown model format {other:?}"))),
        }
    }
}

/// Tags `sentences` and scores the result against their gold tags.
pub fn evaluate_model(model: &TrainedModel, sentences: &[Sentence]) -> Result<(Vec<Sentence>, EvalReport), BenchError> {
    let pred = model.predict(sentences)?;
    let gold: Vec<&[String]> = sentences.iter().map(|s| s.tags.as_slice()).collect();
    let tags: Vec<&[String]> = pred.iter().map(|s| s.tags.as_slice()).collect();
    let report = score(&gold, &tags).map_err(model_err)?;
    Ok((pred, report))
}

/// Trains one model of the given family. `seed` only matters for nn models;
/// the traces stay empty for the deterministic families.
pub fn train_model(
    spec: &ModelSpec,
    corpus: &Corpus,
    embeddings: Option<&EmbeddingTable>,
    seed: u64,
) -> Result<Trained, BenchError> {
    let single = |model: TrainedModel| Trained {
        model,
        f1_trace: vec![],
        loss_trace: vec![],
    };
    match spec {
        ModelSpec::Wfst { order, discount } => {
            let m = WfstTagger::train(&corpus.train, *order, *discount).map_err(model_err)?;
            Ok(single(TrainedModel::Wfst(m)))
        }
        ModelSpec::Crf {
            templates,
            config,
            embeddings: with_emb,
        } => {
            let emb = if *with_emb { embeddings } else { None };
            let m = crf::train(&corpus.train, templates, config, emb).map_err(model_err)?;
            Ok(single(TrainedModel::Crf(m)))
        }
        ModelSpec::Neural(config) => {
            let mut config = config.clone();
            config.seed = seed;
            let out = train_run(&config, corpus, embeddings).map_err(model_err)?;
            Ok(Trained {
                model: TrainedModel::Neural(out.tagger),
                f1_trace: out.f1_trace,
                loss_trace: out.loss_trace,
            })
        }
    }
}
