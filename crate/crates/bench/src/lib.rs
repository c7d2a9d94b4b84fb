//! Recipe-driven experiment runner: loads datasets, trains any model family
//! over a seed sweep, scores with the chunk scorer and reports min/avg/best
//! against reference numbers.

pub mod gradcheck;
pub mod model;
pub mod recipe;
pub mod report;
pub mod runner;

use std::path::PathBuf;

use thiserror::Error;

pub use model::{evaluate_model, train_model, Trained, TrainedModel};
pub use recipe::{load_recipe_file, parse_recipes, ModelSpec, Recipe};
pub use report::{emit_report, BenchReport, Environment, ReportRow};
pub use runner::{run_recipe, run_recipes, RecipeOutcome, RunOptions, RunRecord};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("recipe {recipe}: {msg}")]
    Recipe { recipe: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },
    #[error("model: {0}")]
    Model(String),
    #[error("recipe {recipe}, seed {seed}: {source}")]
    Run {
        recipe: String,
        seed: u64,
        #[source]
        source: Box<BenchError>,
    },
    #[error("report: {0}")]
    Report(String),
}
