//! Min/avg/best tables against reference scores, as aligned text and CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tagbench_core::eval::RunStats;

use crate::runner::RecipeOutcome;
use crate::BenchError;

pub const REPORT_HEADER: [&str; 7] = ["Recipe", "runs", "min F_1", "avg F_1", "best F_1", "reference", "delta"];
pub const CSV_HEADER: &str = "recipe,seed,f1,min,avg,best,reference,delta";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub recipe: String,
    /// `(seed, f1)` per run.
    pub runs: Vec<(u64, f64)>,
    pub stats: RunStats,
    pub reference_f1: Option<f64>,
}

impl ReportRow {
    pub fn delta(&self) -> Option<f64> {
        self.reference_f1.map(|r| self.stats.avg_f1 - r)
    }
}

impl From<&RecipeOutcome> for ReportRow {
    fn from(o: &RecipeOutcome) -> Self {
        ReportRow {
            recipe: o.recipe.clone(),
            runs: o.runs.iter().map(|r| (r.seed, r.f1)).collect(),
            stats: o.stats.clone(),
            reference_f1: o.reference_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub checksums: BTreeMap<String, String>,
}

impl Environment {
    pub fn capture(checksums: BTreeMap<String, String>) -> Self {
        Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            checksums,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<ReportRow>,
    pub environment: Environment,
}

impl BenchReport {
    pub fn from_outcomes(outcomes: &[RecipeOutcome]) -> Self {
        let checksums = outcomes.iter().flat_map(|o| o.checksums.clone()).collect();
        BenchReport {
            rows: outcomes.iter().map(ReportRow::from).collect(),
            environment: Environment::capture(checksums),
        }
    }

    /// Writes `report.txt`, `report.csv` and `environment.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        let (text, csv) = emit_report(&self.rows);
        let env = serde_json::to_string_pretty(&self.environment).map_err(|e| BenchError::Report(e.to_string()))?;
        std::fs::create_dir_all(dir).map_err(|source| BenchError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, body) in [("report.txt", text), ("report.csv", csv), ("environment.json", env + "\n")] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| BenchError::Io { path, source })?;
        }
        Ok(())
    }
}

/// Two decimals, with rounding to zero printed without a sign.
fn two(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn signed(v: f64) -> String {
    let s = two(v);
    if s.starts_with('-') || s == "0.00" {
        s
    } else {
        format!("+{s}")
    }
}

/// Renders rows sorted by recipe name as an aligned table and as CSV. The
/// CSV has one line per seed followed by an `all` line with the aggregate.
pub fn emit_report(rows: &[ReportRow]) -> (String, String) {
    let mut rows: Vec<&ReportRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.recipe.cmp(&b.recipe));

    let width = rows.iter().map(|r| r.recipe.len()).max().unwrap_or(0).max(REPORT_HEADER[0].len());
    let mut text = format!("{:<width$}", REPORT_HEADER[0]);
    for h in &REPORT_HEADER[1..] {
        let _ = write!(text, "  {h:>9}");
    }
    text.push('\n');
    let mut csv = format!("{CSV_HEADER}\n");
    for r in rows {
        let reference = r.reference_f1.map(two).unwrap_or_default();
        let delta = r.delta().map(signed).unwrap_or_default();
        let (min, avg, best) = (two(r.stats.min_f1), two(r.stats.avg_f1), two(r.stats.best_f1));
        let _ = writeln!(
            text,
            "{:<width$}  {:>9}  {min:>9}  {avg:>9}  {best:>9}  {:>9}  {:>9}",
            r.recipe,
            r.stats.n_runs,
            if reference.is_empty() { "-" } else { &reference },
            if delta.is_empty() { "-" } else { &delta },
        );
        for (seed, f1) in &r.runs {
            let _ = writeln!(csv, "{},{seed},{},,,,{reference},", r.recipe, two(*f1));
        }
        let _ = writeln!(csv, "{},all,,{min},{avg},{best},{reference},{delta}", r.recipe);
    }
    (text, csv)
}
