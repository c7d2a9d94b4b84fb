//! Per-recipe, per-seed training on a bounded worker pool.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tagbench_core::corpus::{load_conll, load_embeddings, write_conll, ColumnSpec, Corpus, EmbeddingTable};
use tagbench_core::eval::{aggregate_runs, RunStats};

use crate::model::{evaluate_model, train_model};
use crate::recipe::{Dataset, Recipe};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub f1: f64,
    pub f1_trace: Vec<f64>,
    pub loss_trace: Vec<f64>,
    pub dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RecipeOutcome {
    pub recipe: String,
    pub model_name: String,
    pub runs: Vec<RunRecord>,
    pub stats: RunStats,
    pub reference_f1: Option<f64>,
    pub citation: Option<String>,
    /// sha256 of every input file, keyed by path.
    pub checksums: BTreeMap<String, String>,
}

/// A loaded dataset and the checksums of the files it came from.
pub struct LoadedData {
    pub corpus: Corpus,
    pub embeddings: Option<EmbeddingTable>,
    pub checksums: BTreeMap<String, String>,
}

fn read(path: &Path, checksums: &mut BTreeMap<String, String>) -> Result<Vec<u8>, BenchError> {
    let bytes = fs::read(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    checksums.insert(path.display().to_string(), format!("{:x}", Sha256::digest(&bytes)));
    Ok(bytes)
}

pub fn load_dataset(d: &Dataset) -> Result<LoadedData, BenchError> {
    let mut checksums = BTreeMap::new();
    let split = |path: &Path, checksums: &mut BTreeMap<String, String>| {
        let bytes = read(path, checksums)?;
        load_conll(bytes.as_slice(), d.columns).map_err(|e| BenchError::Data {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    };
    let train = split(&d.train, &mut checksums)?;
    let test = split(&d.test, &mut checksums)?;
    let (corpus, _unseen) = Corpus::new(train, test);
    let embeddings = match &d.embeddings {
        Some(path) => {
            let bytes = read(path, &mut checksums)?;
            let vocab: BTreeSet<String> = corpus
                .train
                .iter()
                .chain(&corpus.test)
                .flat_map(|s| s.tokens.iter().map(|t| t.key()))
                .collect();
            let table = load_embeddings(bytes.as_slice(), &vocab).map_err(|e| BenchError::Data {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            Some(table)
        }
        None => None,
    };
    Ok(LoadedData {
        corpus,
        embeddings,
        checksums,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    fs::write(path, bytes).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `epoch,loss,f1`, one line per epoch.
pub fn trace_csv(f1: &[f64], loss: &[f64]) -> String {
    let mut out = String::from("epoch,loss,f1\n");
    for (i, f) in f1.iter().enumerate() {
        let l = loss.get(i).map(|l| format!("{l:?}")).unwrap_or_default();
        out.push_str(&format!("{},{l},{f:?}\n", i + 1));
    }
    out
}

fn run_seed(recipe: &Recipe, data: &LoadedData, seed: u64, out_dir: &Path) -> Result<RunRecord, BenchError> {
    let dir = out_dir.join(&recipe.name).join(format!("seed-{seed}"));
    fs::create_dir_all(&dir).map_err(|source| BenchError::Io {
        path: dir.clone(),
        source,
    })?;
    log::info!("{}: training seed {seed}", recipe.name);
    let mut trained = train_model(&recipe.model, &data.corpus, data.embeddings.as_ref(), seed)?;
    let (pred, report) = evaluate_model(&trained.model, &data.corpus.test)?;
    let f1 = report.f1_percent();
    if trained.f1_trace.is_empty() {
        trained.f1_trace.push(f1);
    }

    let mut model_bytes = Vec::new();
    trained.model.save(&mut model_bytes)?;
    write(&dir.join("model.json"), &model_bytes)?;
    let mut pred_bytes = Vec::new();
    write_conll(&mut pred_bytes, &pred, ColumnSpec::TOKEN_TAG).map_err(|e| BenchError::Model(e.to_string()))?;
    write(&dir.join("predictions.txt"), &pred_bytes)?;
    write(&dir.join("trace.csv"), trace_csv(&trained.f1_trace, &trained.loss_trace).as_bytes())?;
    write(&dir.join("score.txt"), report.to_conlleval().as_bytes())?;
    log::info!("{}: seed {seed} F1 {f1:.2}", recipe.name);
    Ok(RunRecord {
        seed,
        f1,
        f1_trace: trained.f1_trace,
        loss_trace: trained.loss_trace,
        dir,
    })
}

fn check_inputs(recipe: &Recipe) -> Result<(), BenchError> {
    let d = &recipe.dataset;
    for p in [Some(&d.train), Some(&d.test), d.embeddings.as_ref()].into_iter().flatten() {
        if !p.is_file() {
            return Err(BenchError::Recipe {
                recipe: recipe.name.clone(),
                msg: format!("input file {} does not exist", p.display()),
            });
        }
    }
    Ok(())
}

/// Runs every seed of one recipe on the current rayon pool. Results land
/// under `out_dir/<recipe>/seed-<n>/`.
pub fn run_recipe(recipe: &Recipe, out_dir: &Path) -> Result<RecipeOutcome, BenchError> {
    check_inputs(recipe)?;
    let data = load_dataset(&recipe.dataset).map_err(|e| BenchError::Recipe {
        recipe: recipe.name.clone(),
        msg: e.to_string(),
    })?;
    let runs: Vec<RunRecord> = recipe
        .seeds
        .par_iter()
        .map(|&seed| {
            run_seed(recipe, &data, seed, out_dir).map_err(|e| BenchError::Run {
                recipe: recipe.name.clone(),
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;
    let f1: Vec<f64> = runs.iter().map(|r| r.f1).collect();
    let stats = aggregate_runs(&f1).map_err(|e| BenchError::Recipe {
        recipe: recipe.name.clone(),
        msg: e.to_string(),
    })?;
    Ok(RecipeOutcome {
        recipe: recipe.name.clone(),
        model_name: recipe.model_name.clone(),
        runs,
        stats,
        reference_f1: recipe.reference_f1,
        citation: recipe.citation.clone(),
        checksums: data.checksums,
    })
}

/// Runs recipes concurrently on a pool of `opts.threads` workers. Every
/// recipe's inputs are checked before any training starts.
pub fn run_recipes(recipes: &[Recipe], opts: &RunOptions) -> Result<Vec<RecipeOutcome>, BenchError> {
    let mut names = BTreeSet::new();
    for r in recipes {
        if !names.insert(&r.name) {
            return Err(BenchError::Recipe {
                recipe: r.name.clone(),
                msg: "defined more than once".into(),
            });
        }
        check_inputs(r)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| BenchError::Report(e.to_string()))?;
    pool.install(|| recipes.par_iter().map(|r| run_recipe(r, &opts.out_dir)).collect())
}
