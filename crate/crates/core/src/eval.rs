//! Chunk-level precision/recall/F1 in the conlleval convention, and
//! min/avg/best aggregation over repeated runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{concept_of, is_outside};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("sentence count mismatch: {gold} gold vs {pred} predicted")]
    SentenceCount { gold: usize, pred: usize },
    #[error("sentence {index}: {gold} gold tags vs {pred} predicted tags")]
    Length {
        index: usize,
        gold: usize,
        pred: usize,
    },
    #[error("cannot aggregate an empty list of runs")]
    NoRuns,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChunkSpan {
    pub concept: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

/// Splits an IOB sequence into maximal chunks, sorted by start.
///
/// An `I-x` that does not continue a chunk of concept `x` opens a new chunk,
/// as conlleval does.
pub fn extract_chunks<S: AsRef<str>>(tags: &[S]) -> Vec<ChunkSpan> {
    let mut chunks = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (prefix, concept) = if is_outside(tag) {
            ("O", None)
        } else {
            (&tag[..1], concept_of(tag))
        };
        let continues = match (open, concept) {
            (Some((c, _)), Some(x)) => prefix == "I" && c == x,
            _ => false,
        };
        if !continues {
            if let Some((c, s)) = open.take() {
                chunks.push(ChunkSpan {
                    concept: c.to_string(),
                    start: s,
                    end: i - 1,
                });
            }
            open = concept.map(|x| (x, i));
        }
    }
    if let Some((c, s)) = open {
        chunks.push(ChunkSpan {
            concept: c.to_string(),
            start: s,
            end: tags.len() - 1,
        });
    }
    chunks
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    fn add(&mut self, o: &Counts) {
        self.correct += o.correct;
        self.predicted += o.predicted;
        self.gold += o.gold;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Rates are fractions in `[0, 1]`; use [`EvalReport::f1_percent`] or the
/// conlleval rendering for display values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_concept: BTreeMap<String, Counts>,
    pub overall: Counts,
    pub tokens: usize,
    pub correct_tags: usize,
}

impl EvalReport {
    pub fn precision(&self) -> f64 {
        self.overall.precision()
    }

    pub fn recall(&self) -> f64 {
        self.overall.recall()
    }

    pub fn f1(&self) -> f64 {
        self.overall.f1()
    }

    pub fn f1_percent(&self) -> f64 {
        100.0 * self.f1()
    }

    pub fn token_accuracy(&self) -> f64 {
        ratio(self.correct_tags, self.tokens)
    }

    /// Text in the layout printed by the conlleval script.
    pub fn to_conlleval(&self) -> String {
        let mut out = String::new();
        let o = &self.overall;
        let _ = writeln!(
            out,
            "processed {} tokens with {} phrases; found: {} phrases; correct: {}.",
            self.tokens, o.gold, o.predicted, o.correct
        );
        if self.tokens > 0 {
            let _ = writeln!(
                out,
                "accuracy: {:6.2}%; precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}",
                100.0 * self.token_accuracy(),
                100.0 * o.precision(),
                100.0 * o.recall(),
                100.0 * o.f1()
            );
        }
        for (concept, c) in &self.per_concept {
            let _ = writeln!(
                out,
                "{:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}",
                concept,
                100.0 * c.precision(),
                100.0 * c.recall(),
                100.0 * c.f1(),
                c.predicted
            );
        }
        out
    }
}

fn canonical(tag: &str) -> &str {
    if is_outside(tag) {
        "O"
    } else {
        tag
    }
}

/// Scores predicted tag sequences against gold ones, chunk by chunk.
pub fn score<G, P, S, T>(gold: &[G], pred: &[P]) -> Result<EvalReport, EvalError>
where
    G: AsRef<[S]>,
    P: AsRef<[T]>,
    S: AsRef<str>,
    T: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut per_concept: BTreeMap<String, Counts> = BTreeMap::new();
    let mut tokens = 0;
    let mut correct_tags = 0;
    for (index, (g, p)) in gold.iter().zip(pred).enumerate() {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g.len() != p.len() {
            return Err(EvalError::Length {
                index,
                gold: g.len(),
                pred: p.len(),
            });
        }
        tokens += g.len();
        correct_tags += g
            .iter()
            .zip(p)
            .filter(|(a, b)| canonical(a.as_ref()) == canonical(b.as_ref()))
            .count();
        let gc = extract_chunks(g);
        let pc = extract_chunks(p);
        for c in &gc {
            per_concept.entry(c.concept.clone()).or_default().gold += 1;
        }
        for c in &pc {
            let e = per_concept.entry(c.concept.clone()).or_default();
            e.predicted += 1;
            if gc.contains(c) {
                e.correct += 1;
            }
        }
    }
    let mut overall = Counts::default();
    for c in per_concept.values() {
        overall.add(c);
    }
    Ok(EvalReport {
        per_concept,
        overall,
        tokens,
        correct_tags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n_runs: usize,
    pub min_f1: f64,
    pub avg_f1: f64,
    pub best_f1: f64,
    pub per_run: Vec<f64>,
}

pub fn aggregate_runs(per_run_f1: &[f64]) -> Result<RunStats, EvalError> {
    if per_run_f1.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let min = per_run_f1.iter().copied().fold(f64::INFINITY, f64::min);
    let best = per_run_f1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = per_run_f1.iter().sum::<f64>() / per_run_f1.len() as f64;
    Ok(RunStats {
        n_runs: per_run_f1.len(),
        min_f1: min,
        // rounding in the mean can step outside [min, max] by an ulp
        avg_f1: mean.clamp(min, best),
        best_f1: best,
        per_run: per_run_f1.to_vec(),
    })
}

pub const RUN_TABLE_HEADER: [&str; 4] = ["Model", "min F1", "avg F1", "best F1"];

/// One line of a min/avg/best table, e.g. `RNN  81.00  82.55  83.96`.
pub fn format_run_row(model: &str, stats: &RunStats, width: usize) -> String {
    format!(
        "{model:<width$} {:>8.2} {:>8.2} {:>8.2}",
        stats.min_f1, stats.avg_f1, stats.best_f1
    )
}

/// Per-seed scores of several models, rendered as an aligned table or CSV.
#[derive(Debug, Clone, Default)]
pub struct RunTable {
    rows: Vec<(String, String, Vec<(u64, f64)>)>,
}

impl RunTable {
    pub fn push(&mut self, model: &str, dataset: &str, runs: Vec<(u64, f64)>) {
        self.rows.push((model.to_string(), dataset.to_string(), runs));
    }

    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|(m, d, _)| m.len() + d.len() + 1)
            .max()
            .unwrap_or(0)
            .max(RUN_TABLE_HEADER[0].len());
        let mut out = format!(
            "{:<width$} {:>8} {:>8} {:>8}\n",
            RUN_TABLE_HEADER[0], RUN_TABLE_HEADER[1], RUN_TABLE_HEADER[2], RUN_TABLE_HEADER[3]
        );
        for (m, d, runs) in &self.rows {
            let f: Vec<f64> = runs.iter().map(|r| r.1).collect();
            if let Ok(stats) = aggregate_runs(&f) {
                out.push_str(&format_run_row(&format!("{m}/{d}"), &stats, width));
                out.push('\n');
            }
        }
        out
    }

    /// Columns `model,dataset,seed,f1,aggregate`; aggregate rows carry the
    /// statistic name in the seed column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,dataset,seed,f1,aggregate\n");
        for (m, d, runs) in &self.rows {
            for (seed, f) in runs {
                let _ = writeln!(out, "{m},{d},{seed},{f:.2},false");
            }
            let f: Vec<f64> = runs.iter().map(|r| r.1).collect();
            if let Ok(s) = aggregate_runs(&f) {
                for (name, v) in [("min", s.min_f1), ("avg", s.avg_f1), ("best", s.best_f1)] {
                    let _ = writeln!(out, "{m},{d},{name},{v:.2},true");
                }
            }
        }
        out
    }
}
