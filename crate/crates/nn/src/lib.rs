//! Dense reverse-mode autodiff and the recurrent, convolutional,
//! encoder-decoder and neural-CRF sequence taggers built on it.

pub mod arch;
pub mod cells;
pub mod checkpoint;
pub mod crf;
pub mod gradcheck;
pub mod graph;
pub mod tensor;
pub mod train;

use thiserror::Error;

pub use arch::{build_tagger, ArchitectureConfig, ArchitectureKind, NeuralTagger};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::grad_check;
pub use graph::{Grads, Graph, NodeId, ParamId, ParamStore};
pub use tensor::Tensor;
pub use train::{evaluate, train_run, TrainOutcome};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Data(String),
    #[error("training failed at epoch {epoch}, batch {batch}: {detail}")]
    Training { epoch: usize, batch: usize, detail: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Eval(#[from] tagbench_core::eval::EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
