//! Versioned JSON checkpoints holding the configuration, vocabularies and
//! every parameter tensor.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::arch::{NeuralTagger, TaggerData};
use crate::NnError;

const FORMAT: &str = "tagbench-nn";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

pub fn save_checkpoint<W: Write>(tagger: &NeuralTagger, out: W) -> Result<(), NnError> {
    let env = Envelope {
        format: FORMAT.to_string(),
        version: VERSION,
        model: TaggerData::from(tagger),
    };
    serde_json::to_writer(out, &env).map_err(|e| NnError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint<R: Read>(input: R) -> Result<NeuralTagger, NnError> {
    let env: Envelope<TaggerData> = serde_json::from_reader(input).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if env.format != FORMAT || env.version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported checkpoint {} v{}", env.format, env.version)));
    }
    env.model.config.validate()?;
    Ok(NeuralTagger::from(env.model))
}
