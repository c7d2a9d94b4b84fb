//! Acceptance gate: one PASS/FAIL/SKIP line per criterion.
//!
//! Criteria 8 and 9 need the public ATIS and MOVIES releases under
//! `TAGBENCH_DATA_DIR` (`atis/{train,test}.txt`, `movies/{train,test}.txt`,
//! `embeddings/vectors.txt`) and are skipped without them.

#[path = "../../core/tests/oracles/mod.rs"]
mod core_oracles;
#[path = "../../nn/tests/oracles/mod.rs"]
mod nn_oracles;
mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagbench::runner::load_dataset;
use tagbench::{emit_report, load_recipe_file, run_recipe, Recipe, ReportRow};
use tagbench_core::eval::aggregate_runs;
use tagbench_nn::cells::CellKind;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Result<String, String>) -> Verdict {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    match r {
        Ok(detail) => match limit {
            Some(l) if took > l => Verdict::Fail(format!("{detail}; took {took:.2?}, limit {l:?}")),
            _ => Verdict::Pass(format!("{detail}; {took:.2?}")),
        },
        Err(e) => Verdict::Fail(format!("{e}; {took:.2?}")),
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn crf_exactness() -> Verdict {
    timed(secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let lat = core_oracles::crf::random_lattice(&mut rng);
            let (log_z, path, _) = core_oracles::crf::brute(&lat.unary, &lat.trans, lat.n, lat.l);
            worst = worst.max((lat.log_partition() - log_z).abs());
            if lat.viterbi().0 != path {
                return Err(format!("case {i}: Viterbi path differs from brute-force argmax"));
            }
        }
        if worst < 1e-8 {
            Ok(format!("200 lattices, max |logZ error| {worst:.1e}, all Viterbi paths exact"))
        } else {
            Err(format!("max |logZ error| {worst:.1e} >= 1e-8"))
        }
    })
}

fn neural_crf_exactness() -> Verdict {
    timed(secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        for i in 0..200 {
            nn_oracles::neural_crf::case(&mut rng).map_err(|e| format!("case {i}: {e}"))?;
        }
        Ok("200 random (N <= 5, L <= 4) cases within 1e-8, decoding exact".into())
    })
}

fn gradient_suite() -> Verdict {
    timed(secs(60), || {
        use nn_oracles::gradients::{cell_error, char_conv_error, lstm_crf_error, op_cases, op_error};
        let mut errors: Vec<(String, f64)> = op_cases().iter().map(|c| (c.name.to_string(), op_error(c))).collect();
        for kind in [CellKind::Elman, CellKind::Lstm, CellKind::Gru] {
            errors.push((format!("{kind:?} cell"), cell_error(kind)));
        }
        errors.push(("char-conv".into(), char_conv_error()));
        errors.push(("LSTM-CRF loss".into(), lstm_crf_error()));
        let (name, worst) = errors.iter().cloned().fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let bad: Vec<String> = errors.iter().filter(|e| e.1 >= 1e-4).map(|e| format!("{} {:.1e}", e.0, e.1)).collect();
        if bad.is_empty() {
            Ok(format!("{} checks, worst {name} at {worst:.1e}", errors.len()))
        } else {
            Err(format!("relative error >= 1e-4: {bad:?}"))
        }
    })
}

fn kn_normalization() -> Verdict {
    timed(secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let mut parts = Vec::new();
        for order in 2..=4 {
            let d = core_oracles::wfst::kn_max_deviation(order, &mut rng);
            if d >= 1e-6 {
                return Err(format!("order {order}: max |sum - 1| = {d:.1e}"));
            }
            parts.push(format!("order {order} {d:.1e}"));
        }
        Ok(format!("max |sum P(w|h) - 1|: {}", parts.join(", ")))
    })
}

fn wfst_optimality() -> Verdict {
    timed(secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for i in 0..100 {
            core_oracles::wfst::decode_case(&mut rng).map_err(|e| format!("case {i}: {e}"))?;
        }
        Ok("100 toy models, decoded cost equals exhaustive minimum".into())
    })
}

fn scorer_parity() -> Verdict {
    use core_oracles::conlleval::{check, fixture, random_case, FIXTURES};
    timed(None, || {
        if FIXTURES.len() < 20 {
            return Err(format!("only {} fixtures", FIXTURES.len()));
        }
        for i in 0..FIXTURES.len() {
            let (g, p) = fixture(i);
            check(&g, &p).map_err(|e| format!("fixture {i}: {e}"))?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        for i in 0..1000 {
            let (g, p) = random_case(&mut rng);
            check(&g, &p).map_err(|e| format!("random case {i}: {e}"))?;
        }
        Ok(format!("{} fixtures and 1000 random cases identical to conlleval output", FIXTURES.len()))
    })
}

fn variability_protocol() -> Verdict {
    timed(None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        for i in 0..1000 {
            let n = rng.gen_range(1..60);
            let base: f64 = rng.gen_range(0.0..100.0);
            let f1: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.3) { base } else { (base + rng.gen_range(-5.0..5.0)).clamp(0.0, 100.0) })
                .collect();
            let s = aggregate_runs(&f1).map_err(|e| e.to_string())?;
            if !(s.min_f1 <= s.avg_f1 && s.avg_f1 <= s.best_f1) || s.n_runs != n {
                return Err(format!("input {i}: min {} avg {} best {}", s.min_f1, s.avg_f1, s.best_f1));
            }
        }
        let stats = aggregate_runs(&[94.0, 94.2, 94.4]).map_err(|e| e.to_string())?;
        let row = ReportRow {
            recipe: "atis-lstm-crf".into(),
            runs: vec![(1, 94.0), (2, 94.2), (3, 94.4)],
            stats,
            reference_f1: Some(94.72),
        };
        let (text, csv) = emit_report(&[row]);
        let head = text.lines().next().unwrap_or_default();
        let cols: Vec<Option<usize>> = ["min F_1", "avg F_1", "best F_1"].iter().map(|h| head.find(h)).collect();
        let ordered = cols.iter().all(Option::is_some) && cols.windows(2).all(|w| w[0] < w[1]);
        if !ordered {
            return Err(format!("header {head:?} lacks min/avg/best F_1 in order"));
        }
        if !csv.contains("atis-lstm-crf,all,,94.00,94.20,94.40,94.72,-0.52") {
            return Err(format!("unexpected CSV {csv:?}"));
        }
        Ok("1000 random inputs satisfy min <= avg <= best; header has min/avg/best F_1 columns".into())
    })
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("TAGBENCH_DATA_DIR").map(PathBuf::from).filter(|p| p.is_dir())
}

fn shipped(file: &str, name: &str, root: &Path) -> Result<Recipe, String> {
    load_recipe_file(&common::recipe_dir().join(file), Some(root))
        .map_err(|e| e.to_string())?
        .into_iter()
        .find(|r| r.name == name)
        .ok_or_else(|| format!("{file} has no recipe {name}"))
}

fn end_to_end_atis() -> Verdict {
    let Some(root) = data_dir() else {
        return Verdict::Skip("TAGBENCH_DATA_DIR not set; the ATIS release is not bundled".into());
    };
    let out = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let checks = [
        ("baselines.toml", "atis-crf", 92.5, 15 * 60),
        ("baselines.toml", "atis-wfst", 91.5, 5 * 60),
        ("neural.toml", "atis-lstm-crf", 93.0, 4 * 3600),
    ];
    let mut parts = Vec::new();
    let mut failed = false;
    for (file, name, floor, limit) in checks {
        let v = timed(secs(limit), || {
            let r = shipped(file, name, &root)?;
            let o = run_recipe(&r, out.path()).map_err(|e| e.to_string())?;
            let f1 = o.stats.avg_f1;
            let msg = format!("{name} avg F1 {f1:.2} over {} run(s) (floor {floor})", o.runs.len());
            if f1 >= floor {
                Ok(msg)
            } else {
                Err(msg)
            }
        });
        match v {
            Verdict::Pass(m) => parts.push(m),
            Verdict::Fail(m) | Verdict::Skip(m) => {
                failed = true;
                parts.push(m)
            }
        }
    }
    if failed {
        Verdict::Fail(parts.join(" | "))
    } else {
        Verdict::Pass(parts.join(" | "))
    }
}

fn corpus_statistics() -> Verdict {
    let Some(root) = data_dir() else {
        return Verdict::Skip("TAGBENCH_DATA_DIR not set; the ATIS and MOVIES releases are not bundled".into());
    };
    timed(None, || {
        let atis = load_dataset(&shipped("baselines.toml", "atis-crf-emb", &root)?.dataset).map_err(|e| e.to_string())?;
        let movies = load_dataset(&shipped("baselines.toml", "movies-crf", &root)?.dataset).map_err(|e| e.to_string())?;
        let a = atis.corpus.stats();
        let m = movies.corpus.stats();
        let emb = atis.embeddings.as_ref().ok_or("no embeddings loaded for ATIS")?;
        let (miss_train, miss_test) = (emb.missing_types(&atis.corpus.train), emb.missing_types(&atis.corpus.test));
        let oov = m.oov_rate.unwrap_or(f64::NAN);
        let got = format!(
            "ATIS {}/{} sentences, {} tags, {miss_train}/{miss_test} types without a vector; MOVIES {}/{} sentences, {} concepts, OOV {oov:.3}",
            a.train_sentences, a.test_sentences, a.tags_with_prefix, m.train_sentences, m.test_sentences, m.concepts
        );
        let ok = (a.train_sentences, a.test_sentences, a.tags_with_prefix) == (4978, 893, 127)
            && (miss_train, miss_test) == (18, 9)
            && (m.train_sentences, m.test_sentences, m.concepts) == (3338, 1084, 43)
            && (oov - 0.24).abs() <= 0.02;
        if ok {
            Ok(got)
        } else {
            Err(got)
        }
    })
}

fn determinism() -> Verdict {
    timed(None, || {
        let mut checked = Vec::new();
        for r in common::toy_recipes().into_iter().filter(|r| !r.model.is_deterministic()) {
            let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
            let x = run_recipe(&r, a.path()).map_err(|e| e.to_string())?;
            let y = run_recipe(&r, b.path()).map_err(|e| e.to_string())?;
            for (p, q) in x.runs.iter().zip(&y.runs) {
                let same_traces = p.f1_trace.iter().map(|v| v.to_bits()).eq(q.f1_trace.iter().map(|v| v.to_bits()))
                    && p.loss_trace.iter().map(|v| v.to_bits()).eq(q.loss_trace.iter().map(|v| v.to_bits()));
                let ckpt = |d: &Path| std::fs::read(d.join("model.json")).map_err(|e| e.to_string());
                if !same_traces || ckpt(&p.dir)? != ckpt(&q.dir)? {
                    return Err(format!("{} seed {} differs between runs", r.name, p.seed));
                }
            }
            checked.push(format!("{} ({} seeds)", r.name, x.runs.len()));
        }
        if checked.is_empty() {
            return Err("no nn recipe in toy.toml".into());
        }
        Ok(format!("bit-identical F1 traces, loss traces and checkpoints: {}", checked.join(", ")))
    })
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("CRF exactness", crf_exactness),
        ("neural-CRF exactness", neural_crf_exactness),
        ("gradient suite", gradient_suite),
        ("KN normalization", kn_normalization),
        ("WFST decode optimality", wfst_optimality),
        ("scorer parity", scorer_parity),
        ("variability protocol", variability_protocol),
        ("end-to-end ATIS", end_to_end_atis),
        ("corpus statistics", corpus_statistics),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (tag, detail) = match check() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {} ({name}): {detail}", i + 1);
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
