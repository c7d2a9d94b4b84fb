use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tagbench::model::{evaluate_model, train_model};
use tagbench::recipe::load_recipe_file;
use tagbench::report::BenchReport;
use tagbench::runner::{load_dataset, run_recipes, trace_csv, RunOptions};
use tagbench::{gradcheck, Recipe, TrainedModel};
use tagbench_core::corpus::{load_conll, write_conll, ColumnSpec, Sentence, Token};
use tagbench_core::eval::{aggregate_runs, score};
use tagbench_nn::ArchitectureKind;

#[derive(Parser)]
#[command(name = "tagbench", version, about = "Concept tagging benchmark: WFST, CRF and neural taggers")]
struct Cli {
    /// Directory for models, predictions and reports.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the seed list of neural recipes with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root for dataset paths in recipe files without a `data_root`.
    #[arg(long, global = true, env = "TAGBENCH_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Columns {
    TokenTag,
    TokenPosTag,
    Full,
}

impl From<Columns> for ColumnSpec {
    fn from(c: Columns) -> Self {
        match c {
            Columns::TokenTag => ColumnSpec::TOKEN_TAG,
            Columns::TokenPosTag => ColumnSpec { pos: true, lemma: false },
            Columns::Full => ColumnSpec::FULL,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// One whitespace-tokenized sentence per line.
    Plain,
    /// Column format; the tag column is ignored.
    Conll,
}

#[derive(Subcommand)]
enum Command {
    /// Train one recipe with one seed and save the model.
    Train {
        recipes: PathBuf,
        name: String,
        /// Model output path (default: <out-dir>/<name>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Tag sentences with a saved model; prints `token tag` lines.
    Tag {
        #[arg(long)]
        model: PathBuf,
        /// Input file (default: stdin).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "plain")]
        format: InputFormat,
        #[arg(long, value_enum, default_value = "token-tag")]
        columns: Columns,
    },
    /// Score prediction files against a gold file.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value = "token-tag")]
        columns: Columns,
        #[arg(required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Run recipe files and write a report.
    Bench {
        #[arg(required = true)]
        recipes: Vec<PathBuf>,
        /// Only run recipes with these names.
        #[arg(long)]
        only: Vec<String>,
        /// Validate and list the recipes without training.
        #[arg(long)]
        dry_run: bool,
    },
    /// Finite-difference gradient check of whole taggers.
    Gradcheck {
        /// Architectures to check (default: all).
        #[arg(long)]
        kind: Vec<ArchitectureKind>,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn load_recipes(paths: &[PathBuf], data_dir: Option<&Path>, seed: Option<u64>) -> Result<Vec<Recipe>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(load_recipe_file(p, data_dir)?);
    }
    if let Some(seed) = seed {
        out = out.iter().map(|r| r.with_seed(seed)).collect();
    }
    Ok(out)
}

fn train(cli: &Cli, recipes: &Path, name: &str, model: Option<&Path>) -> Result<()> {
    let all = load_recipes(&[recipes.to_path_buf()], cli.data_dir.as_deref(), cli.seed)?;
    let recipe = all
        .into_iter()
        .find(|r| r.name == name)
        .with_context(|| format!("no recipe named {name:?} in {}", recipes.display()))?;
    let data = load_dataset(&recipe.dataset).with_context(|| format!("recipe {name}"))?;
    let seed = recipe.seeds[0];
    let trained = train_model(&recipe.model, &data.corpus, data.embeddings.as_ref(), seed)
        .with_context(|| format!("recipe {name}, seed {seed}"))?;
    let (_, report) = evaluate_model(&trained.model, &data.corpus.test)?;
    let path = model.map(Path::to_path_buf).unwrap_or_else(|| cli.out_dir.join(name).join("model.json"));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    trained.model.save(BufWriter::new(File::create(&path)?))?;
    if !trained.f1_trace.is_empty() {
        std::fs::write(path.with_extension("trace.csv"), trace_csv(&trained.f1_trace, &trained.loss_trace))?;
    }
    println!("{name} seed {seed}: test F1 {:.2}, model written to {}", report.f1_percent(), path.display());
    Ok(())
}

fn plain_sentences(text: &str) -> Vec<Sentence> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let tokens: Vec<Token> = l.split_whitespace().map(Token::new).collect();
            let tags = vec!["O".to_string(); tokens.len()];
            Sentence { tokens, tags }
        })
        .collect()
}

fn tag(model: &Path, input: Option<&Path>, format: InputFormat, columns: Columns) -> Result<()> {
    let model = TrainedModel::load(BufReader::new(open(model)?))?;
    let mut text = String::new();
    match input {
        Some(p) => {
            open(p)?.read_to_string(&mut text)?;
        }
        None => {
            io::stdin().lock().read_to_string(&mut text)?;
        }
    }
    let sentences = match format {
        InputFormat::Plain => plain_sentences(&text),
        InputFormat::Conll => load_conll(text.as_bytes(), columns.into())?,
    };
    let pred = model.predict(&sentences)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    write_conll(&mut out, &pred, ColumnSpec::TOKEN_TAG)?;
    out.flush()?;
    Ok(())
}

fn read_split(path: &Path, columns: ColumnSpec) -> Result<Vec<Sentence>> {
    load_conll(BufReader::new(open(path)?), columns).with_context(|| format!("reading {}", path.display()))
}

fn eval(gold: &Path, columns: Columns, predictions: &[PathBuf]) -> Result<()> {
    let gold_s = read_split(gold, columns.into())?;
    let gold_tags: Vec<&[String]> = gold_s.iter().map(|s| s.tags.as_slice()).collect();
    let mut f1 = Vec::new();
    for p in predictions {
        let pred = read_split(p, ColumnSpec::TOKEN_TAG)?;
        for (i, (g, q)) in gold_s.iter().zip(&pred).enumerate() {
            if g.tokens.iter().map(|t| &t.surface).ne(q.tokens.iter().map(|t| &t.surface)) {
                bail!("{}: sentence {} has different tokens than the gold file", p.display(), i + 1);
            }
        }
        let tags: Vec<&[String]> = pred.iter().map(|s| s.tags.as_slice()).collect();
        let report = score(&gold_tags, &tags).with_context(|| p.display().to_string())?;
        println!("== {}", p.display());
        print!("{}", report.to_conlleval());
        f1.push(report.f1_percent());
    }
    if f1.len() > 1 {
        let s = aggregate_runs(&f1)?;
        println!("{} runs: min F_1 {:.2}, avg F_1 {:.2}, best F_1 {:.2}", s.n_runs, s.min_f1, s.avg_f1, s.best_f1);
    }
    Ok(())
}

fn bench(cli: &Cli, files: &[PathBuf], only: &[String], dry_run: bool) -> Result<()> {
    let mut recipes = load_recipes(files, cli.data_dir.as_deref(), cli.seed)?;
    if !only.is_empty() {
        for name in only {
            if !recipes.iter().any(|r| &r.name == name) {
                bail!("no recipe named {name:?}");
            }
        }
        recipes.retain(|r| only.contains(&r.name));
    }
    if dry_run {
        for r in &recipes {
            println!("{:<28} {:<18} seeds {:?}", r.name, r.model_name, r.seeds);
        }
        return Ok(());
    }
    let opts = RunOptions {
        out_dir: cli.out_dir.clone(),
        threads: cli.threads,
    };
    let outcomes = run_recipes(&recipes, &opts)?;
    let report = BenchReport::from_outcomes(&outcomes);
    report.write(&cli.out_dir)?;
    let (text, _) = tagbench::emit_report(&report.rows);
    print!("{text}");
    println!("report written to {}", cli.out_dir.join("report.csv").display());
    Ok(())
}

fn gradcheck_cmd(kinds: &[ArchitectureKind], points: usize, step: f64, seed: u64) -> Result<()> {
    let kinds: Vec<ArchitectureKind> = if kinds.is_empty() { ArchitectureKind::ALL.to_vec() } else { kinds.to_vec() };
    let mut failed = Vec::new();
    for kind in kinds {
        let err = gradcheck::check_architecture(kind, points, step, seed)?;
        let ok = err < 1e-4;
        println!("{:<20} max relative error {err:.3e}  {}", kind.name(), if ok { "ok" } else { "FAIL" });
        if !ok {
            failed.push(kind.name());
        }
    }
    if !failed.is_empty() {
        bail!("gradient check failed for {failed:?}");
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().ok();
    match &cli.command {
        Command::Train { recipes, name, model } => train(&cli, recipes, name, model.as_deref()),
        Command::Tag {
            model,
            input,
            format,
            columns,
        } => tag(model, input.as_deref(), *format, *columns),
        Command::Eval {
            gold,
            columns,
            predictions,
        } => eval(gold, *columns, predictions),
        Command::Bench { recipes, only, dry_run } => bench(&cli, recipes, only, *dry_run),
        Command::Gradcheck { kind, points, step } => gradcheck_cmd(kind, *points, *step, cli.seed.unwrap_or(0)),
    }
}
