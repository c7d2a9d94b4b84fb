//! Recipe files: TOML with one `[name]` table per experiment.
//!
//! ```toml
//! data_root = "../data"          # optional, relative to this file
//!
//! [atis-wfst]
//! train = "atis/train.txt"
//! test = "atis/test.txt"
//! model = "wfst"
//! reference_f1 = 93.08
//! citation = "WFST, ATIS"
//! [atis-wfst.hyper]
//! order = 4
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tagbench_core::corpus::ColumnSpec;
use tagbench_core::crf::features::{atis_templates, movies_templates, DEFAULT_AFFIX_LENGTHS};
use tagbench_core::crf::{parse_templates, FeatureTemplate, TrainConfig};
use tagbench_nn::{ArchitectureConfig, ArchitectureKind};

use crate::BenchError;

pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
pub const DEFAULT_DISCOUNT: f64 = 0.75;

const SVM_NOTE: &str = "the SVM tagger is out of scope: it is defined by an external tool's dynamic-feature \
                        mechanics that are not specified; the CRF represents the discriminative family";

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: PathBuf,
    pub test: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub columns: ColumnSpec,
}

#[derive(Debug, Clone)]
pub enum ModelSpec {
    Wfst { order: usize, discount: f64 },
    Crf { templates: Vec<FeatureTemplate>, config: TrainConfig, embeddings: bool },
    Neural(ArchitectureConfig),
}

impl ModelSpec {
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, ModelSpec::Neural(_))
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Wfst { .. } => "wfst",
            ModelSpec::Crf { embeddings: false, .. } => "crf",
            ModelSpec::Crf { embeddings: true, .. } => "crf+emb",
            ModelSpec::Neural(_) => "nn",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Recipe {
    pub name: String,
    /// Model name as written in the file, e.g. `LSTM-CRF` or `crf+emb`.
    pub model_name: String,
    pub dataset: Dataset,
    pub model: ModelSpec,
    pub seeds: Vec<u64>,
    pub reference_f1: Option<f64>,
    pub citation: Option<String>,
}

impl Recipe {
    /// Copy whose nn seed list is replaced by a single seed. Deterministic
    /// models are unaffected.
    pub fn with_seed(&self, seed: u64) -> Recipe {
        let mut r = self.clone();
        if !r.model.is_deterministic() {
            r.seeds = vec![seed];
        }
        r
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecipe {
    train: String,
    test: String,
    embeddings: Option<String>,
    #[serde(default)]
    columns: Option<String>,
    model: String,
    seeds: Option<Vec<u64>>,
    reference_f1: Option<f64>,
    citation: Option<String>,
    #[serde(default)]
    hyper: toml::Table,
}

fn invalid(name: &str, msg: impl Into<String>) -> BenchError {
    BenchError::Recipe {
        recipe: name.to_string(),
        msg: msg.into(),
    }
}

/// Typed access to a `hyper` table that reports missing, mistyped and
/// unrecognised keys.
struct Hyper<'a> {
    name: &'a str,
    table: &'a toml::Table,
    used: Vec<&'static str>,
}

impl<'a> Hyper<'a> {
    fn new(name: &'a str, table: &'a toml::Table) -> Self {
        Hyper {
            name,
            table,
            used: Vec::new(),
        }
    }

    fn float(&mut self, key: &'static str) -> Result<Option<f64>, BenchError> {
        self.used.push(key);
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(v) => Err(invalid(self.name, format!("hyper.{key} must be a number, found {v}"))),
        }
    }

    fn int(&mut self, key: &'static str) -> Result<Option<usize>, BenchError> {
        self.used.push(key);
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
            Some(v) => Err(invalid(self.name, format!("hyper.{key} must be a non-negative integer, found {v}"))),
        }
    }

    fn boolean(&mut self, key: &'static str) -> Result<Option<bool>, BenchError> {
        self.used.push(key);
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(v)) => Ok(Some(*v)),
            Some(v) => Err(invalid(self.name, format!("hyper.{key} must be a boolean, found {v}"))),
        }
    }

    fn string(&mut self, key: &'static str) -> Result<Option<String>, BenchError> {
        self.used.push(key);
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::String(v)) => Ok(Some(v.clone())),
            Some(v) => Err(invalid(self.name, format!("hyper.{key} must be a string, found {v}"))),
        }
    }

    fn strings(&mut self, key: &'static str) -> Result<Option<Vec<String>>, BenchError> {
        self.used.push(key);
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    v => Err(invalid(self.name, format!("hyper.{key} must hold strings, found {v}"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(invalid(self.name, format!("hyper.{key} must be an array of strings, found {v}"))),
        }
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T, BenchError> {
        v.ok_or_else(|| invalid(self.name, format!("missing required hyperparameter {key:?}")))
    }

    fn finish(self) -> Result<(), BenchError> {
        let unknown: Vec<&String> = self.table.keys().filter(|k| !self.used.contains(&k.as_str())).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(invalid(self.name, format!("unknown hyperparameters {unknown:?}")))
        }
    }
}

/// Template preset named in a recipe. `crf+emb` adds a word-embedding window
/// matching the token window plus character n-gram indicators.
fn preset(name: &str, recipe: &str, embeddings: bool) -> Result<Vec<FeatureTemplate>, BenchError> {
    let (mut t, window) = match name {
        "movies" => (movies_templates(&DEFAULT_AFFIX_LENGTHS), (-4, 4)),
        "atis" => (atis_templates(&DEFAULT_AFFIX_LENGTHS), (-6, 4)),
        other => return Err(invalid(recipe, format!("unknown template preset {other:?} (expected atis or movies)"))),
    };
    if embeddings {
        t.push(FeatureTemplate::embedding(window.0, window.1));
        t.push(FeatureTemplate::char_ngrams());
    }
    Ok(t)
}

fn model_spec(name: &str, model: &str, hyper: &toml::Table) -> Result<ModelSpec, BenchError> {
    let mut h = Hyper::new(name, hyper);
    let spec = match model.to_ascii_lowercase().as_str() {
        "svm" | "yamcha" => return Err(invalid(name, SVM_NOTE)),
        "wfst" => {
            let order = h.int("order")?;
            let order = h.require("order", order)?;
            if order == 0 {
                return Err(invalid(name, "hyper.order must be at least 1"));
            }
            let discount = h.float("discount")?.unwrap_or(DEFAULT_DISCOUNT);
            if !(discount > 0.0 && discount < 1.0) {
                return Err(invalid(name, format!("hyper.discount must lie in (0, 1), found {discount}")));
            }
            ModelSpec::Wfst { order, discount }
        }
        m @ ("crf" | "crf+emb") => {
            let embeddings = m == "crf+emb";
            let templates = match (h.string("preset")?, h.strings("templates")?) {
                (Some(p), None) => preset(&p, name, embeddings)?,
                (None, Some(specs)) => parse_templates(&specs).map_err(|e| invalid(name, e.to_string()))?,
                (Some(_), Some(_)) => return Err(invalid(name, "give either hyper.preset or hyper.templates, not both")),
                (None, None) => return Err(invalid(name, "missing required hyperparameter \"preset\" or \"templates\"")),
            };
            if templates.is_empty() {
                return Err(invalid(name, "empty template list"));
            }
            let d = TrainConfig::default();
            let config = TrainConfig {
                l2: h.float("l2")?.unwrap_or(d.l2),
                max_iterations: h.int("max_iterations")?.unwrap_or(d.max_iterations),
                tolerance: h.float("tolerance")?.unwrap_or(d.tolerance),
                min_feature_count: h.int("min_feature_count")?.unwrap_or(d.min_feature_count),
            };
            if !(config.l2 >= 0.0 && config.tolerance > 0.0) {
                return Err(invalid(name, "hyper.l2 must be non-negative and hyper.tolerance positive"));
            }
            ModelSpec::Crf {
                templates,
                config,
                embeddings,
            }
        }
        _ => {
            let kind: ArchitectureKind = model
                .parse()
                .map_err(|_| invalid(name, format!("unknown model {model:?}")))?;
            let hidden = h.int("hidden")?;
            let mut c = ArchitectureConfig::new(kind, h.require("hidden", hidden)?);
            let epochs = h.int("epochs")?;
            c.epochs = h.require("epochs", epochs)?;
            let batch = h.int("batch_size")?;
            c.batch_size = h.require("batch_size", batch)?;
            let lr = h.float("lr")?;
            c.lr = h.require("lr", lr)?;
            let drop = h.float("drop_rate")?;
            c.drop_rate = h.require("drop_rate", drop)?;
            let norm = h.float("emb_norm")?;
            c.emb_norm = h.require("emb_norm", norm)?;
            if let Some(b) = h.boolean("bidirectional")? {
                c.bidirectional = b;
            }
            if let Some(b) = h.boolean("freeze_embeddings")? {
                c.freeze_embeddings = b;
            }
            if let Some(d) = h.int("word_dim")? {
                c.word_dim = d;
            }
            if let Some(d) = h.int("char_dim")? {
                c.char_dim = d;
            }
            if let Some(d) = h.int("label_dim")? {
                c.label_dim = d;
            }
            c.validate().map_err(|e| invalid(name, e.to_string()))?;
            ModelSpec::Neural(c)
        }
    };
    h.finish()?;
    Ok(spec)
}

fn columns(name: &str, value: Option<&str>) -> Result<ColumnSpec, BenchError> {
    match value.unwrap_or("token-tag") {
        "token-tag" => Ok(ColumnSpec::TOKEN_TAG),
        "full" => Ok(ColumnSpec::FULL),
        "token-pos-tag" => Ok(ColumnSpec { pos: true, lemma: false }),
        other => Err(invalid(name, format!("unknown column layout {other:?} (token-tag, token-pos-tag or full)"))),
    }
}

fn validate(name: &str, raw: RawRecipe, root: &Path) -> Result<Recipe, BenchError> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(invalid(name, "recipe names must be non-empty and usable as a directory name"));
    }
    let model = model_spec(name, &raw.model, &raw.hyper)?;
    let seeds = match (&model, raw.seeds) {
        (ModelSpec::Neural(_), None) => DEFAULT_SEEDS.to_vec(),
        (ModelSpec::Neural(_), Some(s)) if s.is_empty() => {
            return Err(invalid(name, "nn recipes need at least one seed"));
        }
        (ModelSpec::Neural(_), Some(mut s)) => {
            let n = s.len();
            s.sort_unstable();
            s.dedup();
            if s.len() != n {
                return Err(invalid(name, "duplicate seeds"));
            }
            s
        }
        (_, None) => vec![0],
        (_, Some(s)) if s.len() <= 1 => vec![s.first().copied().unwrap_or(0)],
        (_, Some(_)) => {
            return Err(invalid(name, format!("{} is deterministic and takes at most one seed", raw.model)));
        }
    };
    if matches!(model, ModelSpec::Crf { embeddings: true, .. }) && raw.embeddings.is_none() {
        return Err(invalid(name, "crf+emb needs an embeddings file"));
    }
    if let Some(r) = raw.reference_f1 {
        if !(0.0..=100.0).contains(&r) {
            return Err(invalid(name, format!("reference_f1 {r} outside [0, 100]")));
        }
    }
    Ok(Recipe {
        name: name.to_string(),
        model_name: raw.model,
        dataset: Dataset {
            train: root.join(raw.train),
            test: root.join(raw.test),
            embeddings: raw.embeddings.map(|e| root.join(e)),
            columns: columns(name, raw.columns.as_deref())?,
        },
        model,
        seeds,
        reference_f1: raw.reference_f1,
        citation: raw.citation,
    })
}

/// Parses recipe text. Dataset paths are resolved against the file's
/// `data_root` (itself relative to `base`), else against `data_dir`, else
/// left as written.
pub fn parse_recipes(text: &str, base: &Path, data_dir: Option<&Path>) -> Result<Vec<Recipe>, BenchError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| BenchError::Recipe {
        recipe: String::new(),
        msg: e.to_string(),
    })?;
    let mut root = data_dir.map(Path::to_path_buf).unwrap_or_default();
    let mut sections = BTreeMap::new();
    for (key, value) in table {
        match value {
            toml::Value::Table(t) => {
                sections.insert(key, t);
            }
            toml::Value::String(s) if key == "data_root" => root = base.join(s),
            other => return Err(invalid(&key, format!("unexpected top-level value {other}"))),
        }
    }
    if sections.is_empty() {
        return Err(invalid("", "no recipes found"));
    }
    sections
        .into_iter()
        .map(|(name, t)| {
            let raw: RawRecipe = toml::Value::Table(t)
                .try_into()
                .map_err(|e: toml::de::Error| invalid(&name, e.to_string()))?;
            validate(&name, raw, &root)
        })
        .collect()
}

pub fn load_recipe_file(path: &Path, data_dir: Option<&Path>) -> Result<Vec<Recipe>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_recipes(&text, base, data_dir).map_err(|e| match e {
        BenchError::Recipe { recipe, msg } => BenchError::Recipe {
            recipe: if recipe.is_empty() { path.display().to_string() } else { recipe },
            msg,
        },
        e => e,
    })
}
