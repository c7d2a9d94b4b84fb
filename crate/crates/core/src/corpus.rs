//! Two-column (token, tag) datasets, vocabularies, number classing and
//! pretrained word vectors.
//!
//! Dataset files hold one token per line with whitespace-separated columns:
//! the surface form first, the IOB tag last, and optionally a POS and a lemma
//! column in between. A blank line ends a sentence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel every numeric token is mapped to before vocabulary lookup.
pub const NUMBER_CLASS: &str = "<number>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    Encoding { offset: usize },
    #[error("embedding file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("invalid sentence: {0}")]
    InvalidSentence(String),
    #[error("OOV rate is undefined on an empty test split")]
    EmptySplit,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: Option<String>,
    pub lemma: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            pos: None,
            lemma: None,
        }
    }

    /// Lowercased, number-classed form used for vocabulary and embedding lookup.
    pub fn key(&self) -> String {
        vocab_key(&self.surface)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub tags: Vec<String>,
}

impl Sentence {
    /// Builds a validated sentence.
    pub fn new(tokens: Vec<Token>, tags: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(CorpusError::InvalidSentence("sentence is empty".into()));
        }
        if tokens.len() != tags.len() {
            return Err(CorpusError::InvalidSentence(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        for t in &tokens {
            if t.surface.is_empty() || t.surface.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidSentence(format!(
                    "bad token surface {:?}",
                    t.surface
                )));
            }
        }
        for tag in &tags {
            if !is_valid_tag(tag) {
                return Err(CorpusError::InvalidSentence(format!("bad tag {tag:?}")));
            }
        }
        Ok(Sentence { tokens, tags })
    }

    /// Convenience constructor from parallel word/tag slices.
    pub fn from_pairs(words: &[&str], tags: &[&str]) -> Result<Self> {
        Sentence::new(
            words.iter().map(|w| Token::new(*w)).collect(),
            tags.iter().map(|t| t.to_string()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }
}

/// True for the outside label, spelled either `O` or `null`.
pub fn is_outside(tag: &str) -> bool {
    tag == "O" || tag == "null"
}

pub fn is_valid_tag(tag: &str) -> bool {
    if is_outside(tag) {
        return true;
    }
    match tag.split_once('-') {
        Some(("B" | "I", concept)) => !concept.is_empty(),
        _ => false,
    }
}

/// Strips the IOB prefix; the outside label yields `None`.
pub fn concept_of(tag: &str) -> Option<&str> {
    if is_outside(tag) {
        None
    } else {
        tag.get(2..).filter(|c| !c.is_empty())
    }
}

/// Which optional columns sit between the token and the tag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub pos: bool,
    pub lemma: bool,
}

impl ColumnSpec {
    pub const TOKEN_TAG: ColumnSpec = ColumnSpec {
        pos: false,
        lemma: false,
    };
    pub const FULL: ColumnSpec = ColumnSpec {
        pos: true,
        lemma: true,
    };

    pub fn field_count(&self) -> usize {
        2 + self.pos as usize + self.lemma as usize
    }
}

/// Reads a column-formatted dataset.
pub fn load_conll<R: Read>(mut reader: R, columns: ColumnSpec) -> Result<Vec<Sentence>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Encoding {
        offset: e.valid_up_to(),
    })?;
    parse_conll(text, columns)
}

pub fn parse_conll(text: &str, columns: ColumnSpec) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut start_line = 1;
    let expected = columns.field_count();

    let mut flush = |tokens: &mut Vec<Token>, tags: &mut Vec<String>, line: usize| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let s = Sentence::new(std::mem::take(tokens), std::mem::take(tags))
            .map_err(|e| CorpusError::Parse {
                line,
                msg: e.to_string(),
            })?;
        sentences.push(s);
        Ok(())
    };

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            flush(&mut tokens, &mut tags, start_line)?;
            start_line = lineno + 1;
            continue;
        }
        if fields.len() != expected {
            return Err(CorpusError::Parse {
                line: lineno,
                msg: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let tag = fields[expected - 1];
        if !is_valid_tag(tag) {
            return Err(CorpusError::Parse {
                line: lineno,
                msg: format!("invalid tag {tag:?}"),
            });
        }
        let mut col = 1;
        let pos = columns.pos.then(|| {
            col += 1;
            fields[col - 1].to_string()
        });
        let lemma = columns.lemma.then(|| {
            col += 1;
            fields[col - 1].to_string()
        });
        tokens.push(Token {
            surface: fields[0].to_string(),
            pos,
            lemma,
        });
        tags.push(tag.to_string());
    }
    flush(&mut tokens, &mut tags, start_line)?;
    Ok(sentences)
}

/// Writes sentences back in the column format accepted by [`load_conll`].
pub fn write_conll<W: Write>(mut out: W, sentences: &[Sentence], columns: ColumnSpec) -> Result<()> {
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            write!(out, "{}", tok.surface)?;
            if columns.pos {
                write!(out, " {}", tok.pos.as_deref().unwrap_or("_"))?;
            }
            if columns.lemma {
                write!(out, " {}", tok.lemma.as_deref().unwrap_or("_"))?;
            }
            writeln!(out, " {tag}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Maps a purely numeric token (digits, optionally separated by single
/// `.`, `,` or `:`) to [`NUMBER_CLASS`]; anything else is returned as is.
pub fn normalize_numbers(token: &str) -> String {
    if token == NUMBER_CLASS || is_number(token) {
        NUMBER_CLASS.to_string()
    } else {
        token.to_string()
    }
}

fn is_number(token: &str) -> bool {
    let mut prev_digit = false;
    let mut any = false;
    for c in token.chars() {
        if c.is_ascii_digit() {
            prev_digit = true;
            any = true;
        } else if matches!(c, '.' | ',' | ':') && prev_digit {
            prev_digit = false;
        } else {
            return false;
        }
    }
    any && prev_digit
}

/// Lookup key: lowercase, then number classing.
pub fn vocab_key(surface: &str) -> String {
    normalize_numbers(&surface.to_lowercase())
}

/// A train/test pair plus the train-side tag inventory and vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub tag_inventory: BTreeSet<String>,
    pub vocabulary: BTreeMap<String, usize>,
}

impl Corpus {
    /// Tags present in test but not in train are reported through `log` and
    /// returned, never rejected.
    pub fn new(train: Vec<Sentence>, test: Vec<Sentence>) -> (Self, Vec<String>) {
        let tag_inventory: BTreeSet<String> =
            train.iter().flat_map(|s| s.tags.iter().cloned()).collect();
        let mut vocabulary = BTreeMap::new();
        for tok in train.iter().flat_map(|s| &s.tokens) {
            *vocabulary.entry(tok.key()).or_insert(0) += 1;
        }
        let unseen: BTreeSet<String> = test
            .iter()
            .flat_map(|s| &s.tags)
            .filter(|t| !tag_inventory.contains(*t))
            .cloned()
            .collect();
        for t in &unseen {
            log::warn!("test tag {t:?} does not occur in the training split");
        }
        (
            Corpus {
                train,
                test,
                tag_inventory,
                vocabulary,
            },
            unseen.into_iter().collect(),
        )
    }

    pub fn train_keys(&self) -> BTreeSet<String> {
        self.vocabulary.keys().cloned().collect()
    }

    /// Distinct concept names in train with IOB prefixes stripped.
    pub fn concepts(&self) -> BTreeSet<String> {
        self.tag_inventory
            .iter()
            .filter_map(|t| concept_of(t).map(str::to_string))
            .collect()
    }

    pub fn stats(&self) -> CorpusStats {
        let test_keys: BTreeSet<String> = self
            .test
            .iter()
            .flat_map(|s| s.tokens.iter().map(Token::key))
            .collect();
        CorpusStats {
            train_sentences: self.train.len(),
            test_sentences: self.test.len(),
            tags_with_prefix: self.tag_inventory.len(),
            concepts: self.concepts().len(),
            train_types: self.vocabulary.len(),
            test_types: test_keys.len(),
            avg_train_length: mean_len(&self.train),
            avg_test_length: mean_len(&self.test),
            oov_rate: oov_rate(&self.train_keys(), &self.test).ok(),
        }
    }
}

fn mean_len(s: &[Sentence]) -> f64 {
    if s.is_empty() {
        0.0
    } else {
        s.iter().map(Sentence::len).sum::<usize>() as f64 / s.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub tags_with_prefix: usize,
    pub concepts: usize,
    pub train_types: usize,
    pub test_types: usize,
    pub avg_train_length: f64,
    pub avg_test_length: f64,
    pub oov_rate: Option<f64>,
}

/// Fraction of test token occurrences whose lookup key is absent from
/// `train_vocab`.
pub fn oov_rate(train_vocab: &BTreeSet<String>, test: &[Sentence]) -> Result<f64> {
    let mut total = 0usize;
    let mut unseen = 0usize;
    for tok in test.iter().flat_map(|s| &s.tokens) {
        total += 1;
        if !train_vocab.contains(&tok.key()) {
            unseen += 1;
        }
    }
    if total == 0 {
        return Err(CorpusError::EmptySplit);
    }
    Ok(unseen as f64 / total as f64)
}

/// Pretrained vectors restricted to a vocabulary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dimension: usize,
    #[serde(serialize_with = "sorted_map")]
    pub vectors: HashMap<String, Vec<f64>>,
    pub missing: BTreeSet<String>,
}

/// Writes a hash map in key order so serialized models are reproducible.
fn sorted_map<S: serde::Serializer>(map: &HashMap<String, Vec<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(map.iter().collect::<BTreeMap<_, _>>())
}

impl EmbeddingTable {
    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of distinct keys of `sentences` that have no vector.
    pub fn missing_types(&self, sentences: &[Sentence]) -> usize {
        sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(Token::key))
            .collect::<BTreeSet<_>>()
            .iter()
            .filter(|k| !self.vectors.contains_key(*k))
            .count()
    }
}

/// Reads the textual word-vector format (`word v1 .. vd` per line, with an
/// optional `count dimension` header) and keeps only words in `vocab`.
///
/// File words are matched against vocabulary keys after number classing;
/// an exact match wins over a case-folded one.
pub fn load_embeddings<R: Read>(mut reader: R, vocab: &BTreeSet<String>) -> Result<EmbeddingTable> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Encoding {
        offset: e.valid_up_to(),
    })?;

    let mut dimension: Option<usize> = None;
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut exact: BTreeSet<String> = BTreeSet::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if idx == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() {
            if let Ok(d) = rest[0].parse::<usize>() {
                if d == 0 {
                    return Err(CorpusError::Format {
                        line: lineno,
                        msg: "header declares dimension 0".into(),
                    });
                }
                dimension = Some(d);
                continue;
            }
        }
        let d = *dimension.get_or_insert(rest.len());
        if rest.len() != d || d == 0 {
            return Err(CorpusError::Format {
                line: lineno,
                msg: format!("expected {d} components, found {}", rest.len()),
            });
        }
        let normalized = normalize_numbers(word);
        let folded = vocab_key(word);
        let (key, is_exact) = if vocab.contains(&normalized) {
            (normalized, true)
        } else if vocab.contains(&folded) {
            (folded, false)
        } else {
            continue;
        };
        let mut v = Vec::with_capacity(d);
        for c in &rest {
            let x: f64 = c.parse().map_err(|_| CorpusError::Format {
                line: lineno,
                msg: format!("non-numeric component {c:?}"),
            })?;
            if !x.is_finite() {
                return Err(CorpusError::Format {
                    line: lineno,
                    msg: format!("non-finite component {c:?}"),
                });
            }
            v.push(x);
        }
        if is_exact {
            if exact.insert(key.clone()) {
                vectors.insert(key, v);
            }
        } else if !exact.contains(&key) {
            vectors.entry(key).or_insert(v);
        }
    }
    let missing = vocab
        .iter()
        .filter(|w| !vectors.contains_key(*w))
        .cloned()
        .collect();
    Ok(EmbeddingTable {
        dimension: dimension.unwrap_or(0),
        vectors,
        missing,
    })
}
