//! Feature templates and their expansion into string-keyed feature values.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CrfError;
use crate::corpus::{EmbeddingTable, Sentence};

/// Affix lengths a bare `prefix(..)` / `suffix(..)` template expands to.
pub const DEFAULT_AFFIX_LENGTHS: [usize; 4] = [1, 2, 3, 4];

/// Character n-gram lengths used by the `char-ngrams` template.
pub const CHAR_NGRAM_LENGTHS: [usize; 3] = [2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    TokenWindow,
    PosWindow,
    PrefixWindow,
    SuffixWindow,
    LemmaCurrent,
    ConjunctionPrevCur,
    ConjunctionCurNext,
    EmbeddingWindow,
    CharEmbeddingCurrent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureTemplate {
    pub kind: TemplateKind,
    pub lo: i32,
    pub hi: i32,
    /// Exact affix length for prefix/suffix templates.
    pub affix_length: Option<usize>,
}

impl FeatureTemplate {
    fn window(kind: TemplateKind, lo: i32, hi: i32) -> Self {
        FeatureTemplate {
            kind,
            lo,
            hi,
            affix_length: None,
        }
    }

    pub fn token(lo: i32, hi: i32) -> Self {
        Self::window(TemplateKind::TokenWindow, lo, hi)
    }

    pub fn pos(lo: i32, hi: i32) -> Self {
        Self::window(TemplateKind::PosWindow, lo, hi)
    }

    pub fn prefix(lo: i32, hi: i32, len: usize) -> Self {
        FeatureTemplate {
            affix_length: Some(len),
            ..Self::window(TemplateKind::PrefixWindow, lo, hi)
        }
    }

    pub fn suffix(lo: i32, hi: i32, len: usize) -> Self {
        FeatureTemplate {
            affix_length: Some(len),
            ..Self::window(TemplateKind::SuffixWindow, lo, hi)
        }
    }

    pub fn lemma() -> Self {
        Self::window(TemplateKind::LemmaCurrent, 0, 0)
    }

    pub fn conj_prev_cur() -> Self {
        Self::window(TemplateKind::ConjunctionPrevCur, -1, 0)
    }

    pub fn conj_cur_next() -> Self {
        Self::window(TemplateKind::ConjunctionCurNext, 0, 1)
    }

    pub fn embedding(lo: i32, hi: i32) -> Self {
        Self::window(TemplateKind::EmbeddingWindow, lo, hi)
    }

    pub fn char_ngrams() -> Self {
        Self::window(TemplateKind::CharEmbeddingCurrent, 0, 0)
    }

    pub fn validate(&self) -> Result<(), CrfError> {
        if self.lo > self.hi {
            return Err(CrfError::Config(format!("template {self}: empty offset range")));
        }
        match self.kind {
            TemplateKind::PrefixWindow | TemplateKind::SuffixWindow => match self.affix_length {
                Some(n) if n >= 1 => Ok(()),
                _ => Err(CrfError::Config(format!("template {self}: affix length must be >= 1"))),
            },
            _ => Ok(()),
        }
    }

    fn offsets(&self) -> std::ops::RangeInclusive<i32> {
        self.lo..=self.hi
    }
}

impl fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = (self.lo, self.hi);
        match self.kind {
            TemplateKind::TokenWindow => write!(f, "token({lo}..{hi})"),
            TemplateKind::PosWindow => write!(f, "pos({lo}..{hi})"),
            TemplateKind::PrefixWindow => write!(f, "prefix({lo}..{hi})@{}", self.affix_length.unwrap_or(0)),
            TemplateKind::SuffixWindow => write!(f, "suffix({lo}..{hi})@{}", self.affix_length.unwrap_or(0)),
            TemplateKind::LemmaCurrent => write!(f, "lemma"),
            TemplateKind::ConjunctionPrevCur => write!(f, "conj-prev-cur"),
            TemplateKind::ConjunctionCurNext => write!(f, "conj-cur-next"),
            TemplateKind::EmbeddingWindow => write!(f, "emb({lo}..{hi})"),
            TemplateKind::CharEmbeddingCurrent => write!(f, "char-ngrams"),
        }
    }
}

/// Parses one template spec. Prefix and suffix specs without `@len` expand
/// to one template per length in [`DEFAULT_AFFIX_LENGTHS`], so the result
/// may hold several templates.
///
/// Accepted forms: `token(-4..4)`, `pos(-1..0)`, `prefix(-1..0)`,
/// `prefix(-1..0)@3`, `suffix(0..0)`, `lemma`, `conj-prev-cur`,
/// `conj-cur-next`, `emb(-4..4)`, `char-ngrams`.
pub fn parse_template(spec: &str) -> Result<Vec<FeatureTemplate>, CrfError> {
    let spec = spec.trim();
    let bad = || CrfError::Config(format!("cannot parse template {spec:?}"));
    match spec {
        "lemma" => return Ok(vec![FeatureTemplate::lemma()]),
        "conj-prev-cur" => return Ok(vec![FeatureTemplate::conj_prev_cur()]),
        "conj-cur-next" => return Ok(vec![FeatureTemplate::conj_cur_next()]),
        "char-ngrams" => return Ok(vec![FeatureTemplate::char_ngrams()]),
        _ => {}
    }
    let (name, rest) = spec.split_once('(').ok_or_else(bad)?;
    let (range, tail) = rest.split_once(')').ok_or_else(bad)?;
    let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
    let lo: i32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i32 = hi.trim().parse().map_err(|_| bad())?;
    let affix: Option<usize> = match tail.trim() {
        "" => None,
        t => Some(t.strip_prefix('@').ok_or_else(bad)?.parse().map_err(|_| bad())?),
    };
    let lengths: Vec<usize> = affix.map(|n| vec![n]).unwrap_or(DEFAULT_AFFIX_LENGTHS.to_vec());
    let out = match name.trim() {
        "token" if affix.is_none() => vec![FeatureTemplate::token(lo, hi)],
        "pos" if affix.is_none() => vec![FeatureTemplate::pos(lo, hi)],
        "emb" if affix.is_none() => vec![FeatureTemplate::embedding(lo, hi)],
        "prefix" => lengths.iter().map(|&n| FeatureTemplate::prefix(lo, hi, n)).collect(),
        "suffix" => lengths.iter().map(|&n| FeatureTemplate::suffix(lo, hi, n)).collect(),
        _ => return Err(bad()),
    };
    for t in &out {
        t.validate()?;
    }
    Ok(out)
}

pub fn parse_templates<S: AsRef<str>>(specs: &[S]) -> Result<Vec<FeatureTemplate>, CrfError> {
    let mut out = Vec::new();
    for s in specs {
        out.extend(parse_template(s.as_ref())?);
    }
    Ok(out)
}

impl FromStr for FeatureTemplate {
    type Err = CrfError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut v = parse_template(s)?;
        if v.len() != 1 {
            return Err(CrfError::Config(format!("{s:?} expands to {} templates", v.len())));
        }
        Ok(v.remove(0))
    }
}

fn boundary(j: i64, n: usize) -> String {
    if j < 0 {
        format!("BOS{j}")
    } else {
        format!("EOS-{}", j - n as i64 + 1)
    }
}

fn word_at(s: &Sentence, j: i64) -> String {
    if j >= 0 && (j as usize) < s.len() {
        s.tokens[j as usize].key()
    } else {
        boundary(j, s.len())
    }
}

fn prefix_of(w: &str, n: usize) -> String {
    w.chars().take(n).collect()
}

fn suffix_of(w: &str, n: usize) -> String {
    let len = w.chars().count();
    w.chars().skip(len.saturating_sub(n)).collect()
}

/// Active features of position `i`: `(key, value)` pairs, discrete ones with
/// value 1. Out-of-range offsets produce `BOS-k` / `EOS-k` markers for
/// discrete kinds and nothing for embedding windows.
pub fn apply_templates(
    sentence: &Sentence,
    i: usize,
    templates: &[FeatureTemplate],
    embeddings: Option<&EmbeddingTable>,
) -> Result<Vec<(String, f64)>, CrfError> {
    let n = sentence.len();
    let mut out = Vec::new();
    let at = |off: i32| i as i64 + off as i64;
    let inside = |j: i64| j >= 0 && (j as usize) < n;
    for t in templates {
        match t.kind {
            TemplateKind::TokenWindow => {
                for off in t.offsets() {
                    out.push((format!("w[{off}]={}", word_at(sentence, at(off))), 1.0));
                }
            }
            TemplateKind::PosWindow => {
                for off in t.offsets() {
                    let j = at(off);
                    let v = if inside(j) {
                        sentence.tokens[j as usize]
                            .pos
                            .clone()
                            .ok_or_else(|| CrfError::Config(format!("template {t} needs a POS column")))?
                    } else {
                        boundary(j, n)
                    };
                    out.push((format!("p[{off}]={v}"), 1.0));
                }
            }
            TemplateKind::PrefixWindow | TemplateKind::SuffixWindow => {
                let len = t.affix_length.unwrap_or(1);
                let (tag, f): (&str, fn(&str, usize) -> String) = if t.kind == TemplateKind::PrefixWindow {
                    ("pre", prefix_of)
                } else {
                    ("suf", suffix_of)
                };
                for off in t.offsets() {
                    let j = at(off);
                    let v = if inside(j) {
                        f(&sentence.tokens[j as usize].surface, len)
                    } else {
                        boundary(j, n)
                    };
                    out.push((format!("{tag}{len}[{off}]={v}"), 1.0));
                }
            }
            TemplateKind::LemmaCurrent => {
                let l = sentence.tokens[i]
                    .lemma
                    .as_deref()
                    .ok_or_else(|| CrfError::Config(format!("template {t} needs a lemma column")))?;
                out.push((format!("l[0]={l}"), 1.0));
            }
            TemplateKind::ConjunctionPrevCur => {
                out.push((
                    format!("w[-1]|w[0]={}|{}", word_at(sentence, at(-1)), word_at(sentence, at(0))),
                    1.0,
                ));
            }
            TemplateKind::ConjunctionCurNext => {
                out.push((
                    format!("w[0]|w[1]={}|{}", word_at(sentence, at(0)), word_at(sentence, at(1))),
                    1.0,
                ));
            }
            TemplateKind::EmbeddingWindow => {
                let table = embeddings
                    .ok_or_else(|| CrfError::Config(format!("template {t} needs an embedding table")))?;
                for off in t.offsets() {
                    let j = at(off);
                    if !inside(j) {
                        continue;
                    }
                    if let Some(v) = table.get(&sentence.tokens[j as usize].key()) {
                        for (d, &x) in v.iter().enumerate() {
                            if x != 0.0 {
                                out.push((format!("e[{off}][{d}]"), x));
                            }
                        }
                    }
                }
            }
            TemplateKind::CharEmbeddingCurrent => {
                let chars: Vec<char> = sentence.tokens[i].surface.chars().collect();
                let mut grams = BTreeSet::new();
                for k in CHAR_NGRAM_LENGTHS {
                    for w in chars.windows(k) {
                        grams.insert(format!("c{k}={}", w.iter().collect::<String>()));
                    }
                }
                out.extend(grams.into_iter().map(|g| (g, 1.0)));
            }
        }
    }
    Ok(out)
}

/// Template rows matching the two published CRF configurations, one per
/// dataset, with affixes expanded over `affix_lengths`.
pub fn movies_templates(affix_lengths: &[usize]) -> Vec<FeatureTemplate> {
    let mut t = vec![FeatureTemplate::token(-4, 4), FeatureTemplate::pos(-1, 0)];
    t.extend(affix_lengths.iter().map(|&n| FeatureTemplate::prefix(-1, 0, n)));
    t.extend(affix_lengths.iter().map(|&n| FeatureTemplate::suffix(0, 0, n)));
    t.push(FeatureTemplate::lemma());
    t.push(FeatureTemplate::conj_prev_cur());
    t.push(FeatureTemplate::conj_cur_next());
    t
}

pub fn atis_templates(affix_lengths: &[usize]) -> Vec<FeatureTemplate> {
    let mut t = vec![FeatureTemplate::token(-6, 4)];
    t.extend(affix_lengths.iter().map(|&n| FeatureTemplate::prefix(-1, 0, n)));
    t.extend(affix_lengths.iter().map(|&n| FeatureTemplate::suffix(0, 0, n)));
    t.push(FeatureTemplate::conj_prev_cur());
    t
}
